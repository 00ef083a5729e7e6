//! The Riemann sphere: unit vectors in R³, extended complex numbers, the
//! stereographic bridge between them, and quadrature for the round
//! probability measure.

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Tolerance on ‖v‖ − 1 accepted for a sphere point before renormalizing.
pub const UNIT_TOL: f64 = 1e-12;

/// A point of S² ⊂ R³.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpherePoint(Vec3);

impl SpherePoint {
    /// Normalizes `v` onto the sphere. Rejects the zero vector and
    /// non-finite input.
    pub fn new(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::Domain(format!("cannot normalize {v:?} onto S²")));
        }
        Ok(Self(v / n))
    }

    pub fn from_coords(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new(Vec3::new(x, y, z))
    }

    /// Wraps a vector that is already unit length up to rounding.
    pub(crate) fn from_unit(v: Vec3) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-9, "not a unit vector: {v:?}");
        Self(v / v.norm())
    }

    pub fn north() -> Self {
        Self(Vec3::z())
    }

    pub fn south() -> Self {
        Self(-Vec3::z())
    }

    pub fn vector(&self) -> Vec3 {
        self.0
    }

    pub fn height(&self) -> f64 {
        self.0.z
    }

    pub fn antipode(&self) -> Self {
        Self(-self.0)
    }

    /// Chordal distance ‖p − q‖ in R³.
    pub fn chordal(&self, other: &SpherePoint) -> f64 {
        (self.0 - other.0).norm()
    }
}

/// A point of the extended complex plane Ĉ = C ∪ {∞}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanePoint {
    Finite(Complex64),
    Infinity,
}

impl PlanePoint {
    pub fn finite(re: f64, im: f64) -> Self {
        PlanePoint::Finite(Complex64::new(re, im))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, PlanePoint::Infinity)
    }

    pub fn value(&self) -> Option<Complex64> {
        match *self {
            PlanePoint::Finite(z) => Some(z),
            PlanePoint::Infinity => None,
        }
    }

    /// Chordal distance between the stereographic images.
    pub fn chordal(&self, other: &PlanePoint) -> f64 {
        stereo_project(*self).chordal(&stereo_project(*other))
    }
}

impl From<Complex64> for PlanePoint {
    fn from(z: Complex64) -> Self {
        PlanePoint::Finite(z)
    }
}

/// Homogeneous coordinates (z : w) of a point of Ĉ, the working
/// representation for Möbius and rational-map arithmetic: both are linear
/// or polynomial in (z, w) and never divide.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homogeneous {
    pub z: Complex64,
    pub w: Complex64,
}

impl Homogeneous {
    pub const INFINITY: Homogeneous = Homogeneous {
        z: Complex64 { re: 1.0, im: 0.0 },
        w: Complex64 { re: 0.0, im: 0.0 },
    };

    pub fn new(z: Complex64, w: Complex64) -> Self {
        Self { z, w }
    }

    /// Rescales so that max(|z|, |w|) = 1. Returns `None` for (0 : 0).
    pub fn normalized(self) -> Option<Self> {
        let s = self.z.norm().max(self.w.norm());
        if s == 0.0 || !s.is_finite() {
            return None;
        }
        Some(Self {
            z: self.z / s,
            w: self.w / s,
        })
    }

    pub fn from_plane(p: PlanePoint) -> Self {
        match p {
            PlanePoint::Finite(z) => {
                if z.norm() > 1.0 {
                    Self::new(Complex64::new(1.0, 0.0), z.inv())
                } else {
                    Self::new(z, Complex64::new(1.0, 0.0))
                }
            }
            PlanePoint::Infinity => Self::INFINITY,
        }
    }

    pub fn to_plane(self) -> PlanePoint {
        if self.w == Complex64::new(0.0, 0.0) {
            PlanePoint::Infinity
        } else {
            PlanePoint::Finite(self.z / self.w)
        }
    }

    /// Stereographic image (2 z w̄, |z|² − |w|²) / (|z|² + |w|²).
    pub fn to_sphere(self) -> SpherePoint {
        let s = self.z.norm().max(self.w.norm());
        let (z, w) = (self.z / s, self.w / s);
        let zz = z.norm_sqr();
        let ww = w.norm_sqr();
        let n = zz + ww;
        let c = 2.0 * z * w.conj() / n;
        SpherePoint::from_unit(Vec3::new(c.re, c.im, (zz - ww) / n))
    }

    /// Inverse stereographic map, choosing the better conditioned of the
    /// two charts (x + iy : 1 − h) and (1 + h : x − iy).
    pub fn from_sphere(p: &SpherePoint) -> Self {
        let v = p.vector();
        if v.z <= 0.0 {
            Self::new(Complex64::new(v.x, v.y), Complex64::new(1.0 - v.z, 0.0))
        } else {
            Self::new(Complex64::new(1.0 + v.z, 0.0), Complex64::new(v.x, -v.y))
        }
    }
}

/// Stereographic projection Ĉ → S², z ↦ (2z/(1+|z|²), (|z|²−1)/(1+|z|²)).
/// Sends 0 to the south pole and ∞ to the north pole.
pub fn stereo_project(z: PlanePoint) -> SpherePoint {
    Homogeneous::from_plane(z).to_sphere()
}

/// Inverse of [`stereo_project`].
pub fn stereo_unproject(p: &SpherePoint) -> PlanePoint {
    let v = p.vector();
    if v.x == 0.0 && v.y == 0.0 {
        return if v.z > 0.0 {
            PlanePoint::Infinity
        } else {
            PlanePoint::Finite(Complex64::new(0.0, 0.0))
        };
    }
    Homogeneous::from_sphere(p).to_plane()
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Three-term recurrence for P_n(x) and P_{n-1}(x).
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Weighted node set approximating the round probability measure on S².
///
/// Product rule: Gauss–Legendre in the height coordinate (which is
/// uniformly distributed under the round measure) times the uniform rule
/// in azimuth. With `order = L` there are L + 1 heights and 2(L + 1)
/// azimuths, so the rule integrates every spherical harmonic of degree at
/// most 2L + 1 exactly. The azimuth count is even and the heights are
/// symmetric, so nodes come in antipodal pairs and ∫ζ dμ vanishes exactly.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    nodes: Vec<SpherePoint>,
    weights: Vec<f64>,
    order: usize,
    polar: usize,
    azimuthal: usize,
}

pub const MIN_QUADRATURE_ORDER: usize = 3;
pub const MAX_QUADRATURE_ORDER: usize = 400;

pub fn make_quadrature(order: usize) -> Result<QuadratureRule> {
    if !(MIN_QUADRATURE_ORDER..=MAX_QUADRATURE_ORDER).contains(&order) {
        return Err(Error::Config(format!(
            "quadrature order {order} outside supported range \
             {MIN_QUADRATURE_ORDER}..={MAX_QUADRATURE_ORDER}"
        )));
    }
    let polar = order + 1;
    let azimuthal = 2 * (order + 1);
    let (heights, gl_weights) = gauss_legendre(polar);
    let mut nodes = Vec::with_capacity(polar * azimuthal);
    let mut weights = Vec::with_capacity(polar * azimuthal);
    for (h, gw) in heights.iter().zip(&gl_weights) {
        let rho = (1.0 - h * h).sqrt();
        for k in 0..azimuthal {
            let phi = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / azimuthal as f64;
            nodes.push(SpherePoint::from_unit(Vec3::new(
                rho * phi.cos(),
                rho * phi.sin(),
                *h,
            )));
            weights.push(0.5 * gw / azimuthal as f64);
        }
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        order,
        polar,
        azimuthal,
    })
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[SpherePoint] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Declared exactness order.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Highest spherical-harmonic degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.order + 1
    }

    pub fn polar_count(&self) -> usize {
        self.polar
    }

    pub fn azimuthal_count(&self) -> usize {
        self.azimuthal
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(0.0, f64::max)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SpherePoint, f64)> {
        self.nodes.iter().zip(self.weights.iter().copied())
    }

    pub fn integrate<F: Fn(&SpherePoint) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(p, w)| w * f(p)).sum()
    }

    pub fn integrate_vec<F: Fn(&SpherePoint) -> Vec3>(&self, f: F) -> Vec3 {
        self.iter().fold(Vec3::zeros(), |acc, (p, w)| acc + w * f(p))
    }

    /// The same weights on rotated nodes.
    pub fn rotated(&self, rotation: &nalgebra::Rotation3<f64>) -> QuadratureRule {
        QuadratureRule {
            nodes: self
                .nodes
                .iter()
                .map(|p| SpherePoint::from_unit(rotation * p.vector()))
                .collect(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn project_reference_points() {
        let s = stereo_project(PlanePoint::finite(0.0, 0.0)).vector();
        assert_abs_diff_eq!(s, Vec3::new(0.0, 0.0, -1.0), epsilon = 1e-15);
        let n = stereo_project(PlanePoint::Infinity).vector();
        assert_abs_diff_eq!(n, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
        let e = stereo_project(PlanePoint::finite(1.0, 0.0)).vector();
        assert_abs_diff_eq!(e, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn unproject_reference_points() {
        assert_eq!(stereo_unproject(&SpherePoint::north()), PlanePoint::Infinity);
        assert_eq!(
            stereo_unproject(&SpherePoint::south()),
            PlanePoint::finite(0.0, 0.0)
        );
        let one = stereo_unproject(&SpherePoint::from_coords(1.0, 0.0, 0.0).unwrap());
        let z = one.value().unwrap();
        assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn huge_plane_points_do_not_overflow() {
        let p = stereo_project(PlanePoint::finite(1e200, -3e200));
        assert!((p.vector().norm() - 1.0).abs() < 1e-12);
        assert!(p.height() > 1.0 - 1e-12);
    }

    #[test]
    fn gauss_legendre_matches_known_rule() {
        let (x, w) = gauss_legendre(3);
        assert_abs_diff_eq!(x[2], (0.6f64).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[0], 5.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 8.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn quadrature_examples() {
        let rule = make_quadrature(30).unwrap();
        assert_abs_diff_eq!(rule.integrate(|_| 1.0), 1.0, epsilon = 1e-12);
        let mean = rule.integrate_vec(|p| p.vector());
        assert!(mean.norm() < 1e-15, "mean {mean:?}");
        let second = rule.integrate(|p| p.height().powi(2));
        assert_abs_diff_eq!(second, 1.0 / 3.0, epsilon = 1e-12);
        assert!(rule.max_weight() < 0.25);
    }

    #[test]
    fn quadrature_rejects_unsupported_orders() {
        assert!(matches!(make_quadrature(2), Err(Error::Config(_))));
        assert!(matches!(make_quadrature(10_000), Err(Error::Config(_))));
        let smallest = make_quadrature(3).unwrap();
        assert!(smallest.max_weight() < 0.25);
    }

    #[test]
    fn sphere_point_rejects_zero() {
        assert!(SpherePoint::new(Vec3::zeros()).is_err());
    }
}
