//! Hyperbolic 3-space in the unit-ball model.
//!
//! Isometries are stored as 2×2 complex matrices of determinant one acting
//! on the boundary sphere by Möbius transformations. Their action on the
//! interior is computed through the upper half-space model, where the
//! Poincaré extension has a closed form; the two models are joined by the
//! isometry whose boundary values are [`stereo_project`](crate::sphere::stereo_project).

use std::f64::consts::{PI, TAU};
use std::ops::Mul;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::sphere::{Homogeneous, PlanePoint, SpherePoint, Vec3};

/// Points with ‖p‖ ≥ 1 − BALL_MARGIN are rejected.
pub const BALL_MARGIN: f64 = 1e-14;

type C = Complex64;

const ONE: C = C { re: 1.0, im: 0.0 };
const ZERO: C = C { re: 0.0, im: 0.0 };

/// A point of the open unit ball.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallPoint(Vec3);

impl BallPoint {
    pub fn new(p: Vec3) -> Result<Self> {
        let n = p.norm();
        if !n.is_finite() || n >= 1.0 - BALL_MARGIN {
            return Err(Error::Domain(format!(
                "ball point {p:?} has norm {n}, outside the open ball"
            )));
        }
        Ok(Self(p))
    }

    pub fn from_coords(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new(Vec3::new(x, y, z))
    }

    pub fn origin() -> Self {
        Self(Vec3::zeros())
    }

    /// The point at hyperbolic distance `distance` from the origin in the
    /// direction of `direction`.
    pub fn at_distance(direction: &SpherePoint, distance: f64) -> Result<Self> {
        Self::new(direction.vector() * (0.5 * distance).tanh())
    }

    /// The point at signed height `h` on the axis from 0 (south pole) to ∞
    /// (north pole).
    pub fn on_axis(h: f64) -> Result<Self> {
        Self::new(Vec3::new(0.0, 0.0, (0.5 * h).tanh()))
    }

    pub fn vector(&self) -> Vec3 {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Hyperbolic distance to the origin.
    pub fn depth(&self) -> f64 {
        2.0 * self.0.norm().atanh()
    }

    pub fn neg(&self) -> Self {
        Self(-self.0)
    }

    /// Coordinates (w, s) in the upper half-space model, where the
    /// boundary plane is Ĉ and the origin of the ball is (0, 1).
    pub fn to_half_space(&self) -> HalfSpacePoint {
        let p = self.0;
        let one_minus = 1.0 - p.norm_squared();
        let den = p.x * p.x + p.y * p.y + (1.0 - p.z) * (1.0 - p.z);
        HalfSpacePoint {
            w: C::new(2.0 * p.x / den, 2.0 * p.y / den),
            s: one_minus / den,
        }
    }

    pub fn from_half_space(q: &HalfSpacePoint) -> Result<Self> {
        let r2 = q.w.norm_sqr() + q.s * q.s;
        let den = r2 + 2.0 * q.s + 1.0;
        Self::new(Vec3::new(2.0 * q.w.re / den, 2.0 * q.w.im / den, (r2 - 1.0) / den))
    }
}

/// A point (w, s) of the upper half-space, s > 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfSpacePoint {
    pub w: Complex64,
    pub s: f64,
}

/// Cylindrical coordinates about the geodesic from 0 to ∞.
///
/// `r` is the distance to the axis, `theta` the angle about it, and `h`
/// the signed position along the axis of the foot of the perpendicular
/// from the point. Translation along the axis shifts `h` and nothing else,
/// so the level sets of `h` are the hyperbolic planes orthogonal to the
/// axis; `h = 0` is the equatorial disk.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CylindricalPoint {
    pub r: f64,
    pub theta: f64,
    pub h: f64,
}

impl CylindricalPoint {
    pub fn new(r: f64, theta: f64, h: f64) -> Result<Self> {
        if !(r >= 0.0) || !theta.is_finite() || !h.is_finite() {
            return Err(Error::Domain(format!(
                "invalid cylindrical coordinates ({r}, {theta}, {h})"
            )));
        }
        Ok(Self {
            r,
            theta: theta.rem_euclid(TAU),
            h,
        })
    }
}

pub fn to_cylindrical(x: &BallPoint) -> CylindricalPoint {
    let q = x.to_half_space();
    let rho = q.w.norm();
    let theta = if rho == 0.0 {
        0.0
    } else {
        q.w.im.atan2(q.w.re).rem_euclid(TAU)
    };
    CylindricalPoint {
        r: (rho / q.s).asinh(),
        theta,
        h: rho.hypot(q.s).ln(),
    }
}

pub fn from_cylindrical(c: &CylindricalPoint) -> Result<BallPoint> {
    let scale = c.h.exp();
    let q = HalfSpacePoint {
        w: C::from_polar(scale * c.r.tanh(), c.theta),
        s: scale / c.r.cosh(),
    };
    BallPoint::from_half_space(&q)
}

/// Hyperbolic distance in the ball model,
/// 2 asinh(‖a − b‖ / √((1 − ‖a‖²)(1 − ‖b‖²))).
pub fn hyp_dist(a: &BallPoint, b: &BallPoint) -> f64 {
    let da = 1.0 - a.0.norm_squared();
    let db = 1.0 - b.0.norm_squared();
    2.0 * ((a.0 - b.0).norm() / (da * db).sqrt()).asinh()
}

/// An orientation-preserving isometry of H³, as a matrix in SL₂(C).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Isometry {
    a: C,
    b: C,
    c: C,
    d: C,
}

impl Isometry {
    pub fn identity() -> Self {
        Self {
            a: ONE,
            b: ZERO,
            c: ZERO,
            d: ONE,
        }
    }

    /// Normalizes to determinant one. Rejects (numerically) singular input.
    pub fn from_matrix(a: C, b: C, c: C, d: C) -> Result<Self> {
        let scale = a.norm().max(b.norm()).max(c.norm()).max(d.norm());
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::Degenerate("zero or non-finite Möbius matrix".into()));
        }
        let (a, b, c, d) = (a / scale, b / scale, c / scale, d / scale);
        let det = a * d - b * c;
        if det.norm() < 1e-14 {
            return Err(Error::Degenerate(format!(
                "Möbius matrix is singular (det {det})"
            )));
        }
        let k = det.sqrt().inv();
        Ok(Self {
            a: a * k,
            b: b * k,
            c: c * k,
            d: d * k,
        })
    }

    pub fn matrix(&self) -> [[C; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub fn det(&self) -> C {
        self.a * self.d - self.b * self.c
    }

    pub fn inverse(&self) -> Self {
        Self {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    pub fn compose(&self, other: &Isometry) -> Self {
        Self {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    /// Rotation of the sphere carrying the north pole (∞) to `target`
    /// and the south pole (0) to its antipode.
    pub fn rotation_to(target: &SpherePoint) -> Self {
        let hom = Homogeneous::from_sphere(target);
        let n = (hom.z.norm_sqr() + hom.w.norm_sqr()).sqrt();
        let (alpha, beta) = (hom.z / n, hom.w / n);
        Self {
            a: alpha,
            b: -beta.conj(),
            c: beta,
            d: alpha.conj(),
        }
    }

    /// Rotation by `angle` about the axis 0–∞ (z ↦ e^{iθ} z).
    pub fn axial_rotation(angle: f64) -> Self {
        let e = C::from_polar(1.0, 0.5 * angle);
        Self {
            a: e,
            b: ZERO,
            c: ZERO,
            d: e.conj(),
        }
    }

    /// Translation by `distance` along the axis toward ∞ (z ↦ e^{s} z).
    pub fn axial_translation(distance: f64) -> Self {
        let e = (0.5 * distance).exp();
        Self {
            a: C::new(e, 0.0),
            b: ZERO,
            c: ZERO,
            d: C::new(1.0 / e, 0.0),
        }
    }

    /// Random isometry with matrix entries drawn from a standard complex
    /// Gaussian-like distribution. Used by tests and scans.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let mut g = || C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let (a, b, c, d) = (g(), g(), g(), g());
            if let Ok(m) = Self::from_matrix(a, b, c, d) {
                if (m.a * m.d - m.b * m.c).norm() > 0.5 && m.max_entry() < 30.0 {
                    return m;
                }
            }
        }
    }

    fn max_entry(&self) -> f64 {
        self.a.norm().max(self.b.norm()).max(self.c.norm()).max(self.d.norm())
    }

    pub fn apply_homogeneous(&self, p: &Homogeneous) -> Homogeneous {
        Homogeneous::new(self.a * p.z + self.b * p.w, self.c * p.z + self.d * p.w)
    }

    pub fn apply_boundary(&self, z: PlanePoint) -> PlanePoint {
        match z {
            PlanePoint::Infinity => {
                if self.c == ZERO {
                    PlanePoint::Infinity
                } else {
                    PlanePoint::Finite(self.a / self.c)
                }
            }
            PlanePoint::Finite(z) => {
                let den = self.c * z + self.d;
                if den == ZERO {
                    PlanePoint::Infinity
                } else {
                    PlanePoint::Finite((self.a * z + self.b) / den)
                }
            }
        }
    }

    pub fn apply_sphere(&self, p: &SpherePoint) -> SpherePoint {
        self.apply_homogeneous(&Homogeneous::from_sphere(p)).to_sphere()
    }

    pub fn apply_half_space(&self, q: &HalfSpacePoint) -> HalfSpacePoint {
        let cw_d = self.c * q.w + self.d;
        let s2 = q.s * q.s;
        let den = cw_d.norm_sqr() + self.c.norm_sqr() * s2;
        HalfSpacePoint {
            w: ((self.a * q.w + self.b) * cw_d.conj() + self.a * self.c.conj() * s2) / den,
            s: q.s / den,
        }
    }

    /// Poincaré extension to the ball. Fails only if the image is so close
    /// to the sphere that it cannot be represented as a valid [`BallPoint`].
    pub fn apply_ball(&self, x: &BallPoint) -> Result<BallPoint> {
        BallPoint::from_half_space(&self.apply_half_space(&x.to_half_space()))
    }

    /// Image of the origin.
    pub fn origin_image(&self) -> Result<BallPoint> {
        self.apply_ball(&BallPoint::origin())
    }
}

impl Mul for Isometry {
    type Output = Isometry;
    fn mul(self, rhs: Isometry) -> Isometry {
        self.compose(&rhs)
    }
}

/// The pure translation M_x carrying the origin to `x` along the geodesic
/// through them, with M_x⁻¹ = M_{−x}:
///
/// M_x = (1 − ‖x‖²)^{−1/2} [[1 + x₃, x₁ + i x₂], [x₁ − i x₂, 1 − x₃]].
pub fn mx_translation(x: &BallPoint) -> Isometry {
    let p = x.0;
    let k = 1.0 / (1.0 - p.norm_squared()).sqrt();
    Isometry {
        a: C::new(k * (1.0 + p.z), 0.0),
        b: C::new(k * p.x, k * p.y),
        c: C::new(k * p.x, -k * p.y),
        d: C::new(k * (1.0 - p.z), 0.0),
    }
}

/// Closed-form ball action of M_x on a point z of the closed ball:
/// (z(1 − ‖x‖²) + x(1 + ‖z‖² + 2⟨x, z⟩)) / (1 + ‖x‖²‖z‖² + 2⟨x, z⟩).
pub fn mx_closed_form(x: &Vec3, z: &Vec3) -> Vec3 {
    let xx = x.norm_squared();
    let zz = z.norm_squared();
    let xz = x.dot(z);
    (z * (1.0 - xx) + x * (1.0 + zz + 2.0 * xz)) / (1.0 + xx * zz + 2.0 * xz)
}

/// Jacobian of the boundary map of M_x at ζ ∈ S²: ((1 − ‖x‖²)/‖ζ + x‖²)².
pub fn boundary_jacobian(x: &BallPoint, zeta: &SpherePoint) -> f64 {
    let q = (1.0 - x.0.norm_squared()) / (zeta.vector() + x.0).norm_squared();
    q * q
}

pub fn apply_boundary(m: &Isometry, z: PlanePoint) -> PlanePoint {
    m.apply_boundary(z)
}

pub fn apply_ball(m: &Isometry, x: &BallPoint) -> Result<BallPoint> {
    m.apply_ball(x)
}

/// Which of the two boundary circles of a [`PairAnnulus`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnnulusBoundary {
    /// The circle at infinity of the plane through the first point.
    First,
    /// The circle at infinity of the plane through the second point.
    Second,
}

/// The round annulus A(x, y) on Ĉ cut out by the two hyperbolic planes
/// orthogonal to the segment [x, y] through its endpoints.
///
/// Stored in normalized position: `normalizer` carries x to the origin and
/// y onto the axis toward ∞, after which the boundary circles are
/// |z| = `inner_radius` (through x) and |z| = `outer_radius` (through y).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairAnnulus {
    pub normalizer: Isometry,
    pub inner_radius: f64,
    pub outer_radius: f64,
    distance: f64,
}

impl PairAnnulus {
    pub fn modulus(&self) -> f64 {
        self.distance / TAU
    }

    /// log |N(z)| for the normalizer N: 0 on the first boundary circle,
    /// `log(outer/inner)` on the second.
    pub fn level(&self, z: &SpherePoint) -> f64 {
        let h = self.normalizer.apply_homogeneous(&Homogeneous::from_sphere(z));
        h.z.norm().ln() - h.w.norm().ln()
    }

    pub fn contains(&self, z: &SpherePoint) -> bool {
        let l = self.level(z);
        l > 0.0 && l < self.distance
    }

    /// `n` points of the chosen boundary circle, in original coordinates.
    pub fn circle_points(&self, which: AnnulusBoundary, n: usize) -> Vec<SpherePoint> {
        let radius = match which {
            AnnulusBoundary::First => self.inner_radius,
            AnnulusBoundary::Second => self.outer_radius,
        };
        let back = self.normalizer.inverse();
        (0..n)
            .map(|k| {
                let z = C::from_polar(radius, TAU * k as f64 / n as f64);
                back.apply_homogeneous(&Homogeneous::new(z, ONE)).to_sphere()
            })
            .collect()
    }
}

pub fn pair_annulus(x: &BallPoint, y: &BallPoint) -> Result<PairAnnulus> {
    let distance = hyp_dist(x, y);
    if distance < 1e-12 {
        return Err(Error::Degenerate(
            "annulus of coincident points is undefined".into(),
        ));
    }
    let to_x = mx_translation(x);
    let y_rel = to_x.inverse().apply_ball(y)?;
    let dir = SpherePoint::new(y_rel.vector())?;
    let frame = to_x * Isometry::rotation_to(&dir);
    Ok(PairAnnulus {
        normalizer: frame.inverse(),
        inner_radius: 1.0,
        outer_radius: distance.exp(),
        distance,
    })
}

/// Modulus log(R_outer / R_inner) / 2π of a round annulus.
pub fn round_annulus_modulus(inner: f64, outer: f64) -> Result<f64> {
    if !(inner > 0.0 && outer > inner && outer.is_finite()) {
        return Err(Error::Domain(format!(
            "round annulus needs 0 < inner < outer, got ({inner}, {outer})"
        )));
    }
    Ok((outer / inner).ln() / (2.0 * PI))
}
