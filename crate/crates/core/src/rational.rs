//! Rational maps of Ĉ as pairs of binary forms (P, Q) of equal degree.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::h3::Isometry;
use crate::poly::HomPoly;
use crate::sphere::{Homogeneous, PlanePoint, SpherePoint};

type C = Complex64;

/// Normalized resultants below this are treated as zero.
pub const RESULTANT_FLOOR: f64 = 1e-60;
/// Largest degree produced by [`RationalMap::compose`] / [`RationalMap::iterate`].
pub const MAX_DEGREE: usize = 64;
/// Largest period accepted by [`RationalMap::find_cycles`].
pub const MAX_PERIOD: usize = 4;
/// Chordal tolerance of the cycle relation f(z_i) = z_{i+1}.
pub const CYCLE_TOL: f64 = 1e-8;
/// Cycle points closer than this trigger a collision warning.
pub const COLLISION_TOL: f64 = 1e-6;

/// f(z : w) = (P(z, w) : Q(z, w)), coefficients scaled so the largest has
/// magnitude one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapRecord", into = "MapRecord")]
pub struct RationalMap {
    p: HomPoly,
    q: HomPoly,
}

/// JSON layout: coefficients from z^d down to w^d as [re, im] pairs.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapRecord {
    #[serde(rename = "P")]
    p: Vec<[f64; 2]>,
    #[serde(rename = "Q")]
    q: Vec<[f64; 2]>,
}

impl TryFrom<MapRecord> for RationalMap {
    type Error = Error;

    fn try_from(r: MapRecord) -> Result<Self> {
        let conv = |v: Vec<[f64; 2]>| v.into_iter().map(|[a, b]| C::new(a, b)).collect();
        RationalMap::new(conv(r.p), conv(r.q))
    }
}

impl From<RationalMap> for MapRecord {
    fn from(f: RationalMap) -> Self {
        let conv = |p: &HomPoly| p.coeffs().iter().map(|c| [c.re, c.im]).collect();
        MapRecord {
            p: conv(&f.p),
            q: conv(&f.q),
        }
    }
}

/// A periodic orbit z_0 → z_1 → … → z_{q−1} → z_0 with its multiplier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicCycle {
    pub points: Vec<PlanePoint>,
    pub period: usize,
    pub multiplier: C,
}

impl PeriodicCycle {
    /// log |multiplier|, −∞ for superattracting cycles.
    pub fn length(&self) -> f64 {
        if self.multiplier == C::new(0.0, 0.0) {
            f64::NEG_INFINITY
        } else {
            self.multiplier.norm().ln()
        }
    }
}

/// Which affine chart a point is read in: z/w, or w/z near ∞.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Chart {
    Finite,
    AtInfinity,
}

impl Chart {
    fn of(p: &Homogeneous) -> Chart {
        if p.z.norm() <= p.w.norm() {
            Chart::Finite
        } else {
            Chart::AtInfinity
        }
    }
}

fn scaled_to_unit(p: Vec<C>, q: Vec<C>) -> Option<(HomPoly, HomPoly)> {
    let s = p.iter().chain(&q).map(|c| c.norm()).fold(0.0, f64::max);
    if s == 0.0 || !s.is_finite() {
        return None;
    }
    let p = HomPoly::new(p.into_iter().map(|c| c / s).collect());
    let q = HomPoly::new(q.into_iter().map(|c| c / s).collect());
    Some((p, q))
}

impl RationalMap {
    /// Builds and normalizes a map from coefficient lists of length d + 1.
    /// Rejects mismatched lengths, d = 0 and (numerically) vanishing
    /// resultant.
    pub fn new(p: Vec<C>, q: Vec<C>) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::Config(format!(
                "P and Q need the same number of coefficients, got {} and {}",
                p.len(),
                q.len()
            )));
        }
        if p.len() < 2 {
            return Err(Error::Config("a rational map needs degree at least 1".into()));
        }
        if p.iter().chain(&q).any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Config("non-finite coefficient".into()));
        }
        let (p, q) = scaled_to_unit(p, q)
            .ok_or_else(|| Error::Degenerate("all coefficients vanish".into()))?;
        let f = Self { p, q };
        let res = f.resultant_magnitude();
        if !(res >= RESULTANT_FLOOR) {
            return Err(Error::Degenerate(format!(
                "resultant {res:e} is below {RESULTANT_FLOOR:e}: P and Q share a root"
            )));
        }
        Ok(f)
    }

    /// Normalizes without the resultant check; callers guarantee P, Q are
    /// coprime (compositions of valid maps are).
    fn from_forms(p: HomPoly, q: HomPoly) -> Self {
        let (p, q) = scaled_to_unit(p.coeffs().to_vec(), q.coeffs().to_vec())
            .expect("composition of valid maps has a nonzero coefficient");
        Self { p, q }
    }

    /// z ↦ Σ a_k z^{d−k}, coefficients from the leading one down.
    pub fn polynomial(coeffs: &[C]) -> Result<Self> {
        let d = coeffs.len().saturating_sub(1);
        let mut q = vec![C::new(0.0, 0.0); d + 1];
        q[d] = C::new(1.0, 0.0);
        Self::new(coeffs.to_vec(), q)
    }

    pub fn identity() -> Self {
        Self::mobius(&Isometry::identity())
    }

    /// z ↦ z^d.
    pub fn power(d: usize) -> Result<Self> {
        let mut p = vec![C::new(0.0, 0.0); d + 1];
        p[0] = C::new(1.0, 0.0);
        Self::polynomial(&p)
    }

    pub fn mobius(m: &Isometry) -> Self {
        let [[a, b], [c, d]] = m.matrix();
        Self::from_forms(HomPoly::new(vec![a, b]), HomPoly::new(vec![c, d]))
    }

    /// Random map of degree d with coefficients uniform in the unit disk,
    /// redrawn until the normalized resultant exceeds `min_resultant`.
    pub fn random<R: Rng + ?Sized>(d: usize, min_resultant: f64, rng: &mut R) -> Self {
        loop {
            let mut draw = || {
                (0..=d)
                    .map(|_| {
                        let r = rng.gen::<f64>().sqrt();
                        C::from_polar(r, rng.gen::<f64>() * std::f64::consts::TAU)
                    })
                    .collect::<Vec<_>>()
            };
            let (p, q) = (draw(), draw());
            if let Ok(f) = Self::new(p, q) {
                if f.resultant_magnitude() > min_resultant {
                    return f;
                }
            }
        }
    }

    pub fn degree(&self) -> usize {
        self.p.degree()
    }

    pub fn p(&self) -> &HomPoly {
        &self.p
    }

    pub fn q(&self) -> &HomPoly {
        &self.q
    }

    /// f at a point in homogeneous coordinates; the result has
    /// max(|z|, |w|) = 1.
    pub fn eval_homogeneous(&self, x: &Homogeneous) -> Result<Homogeneous> {
        let x = x
            .normalized()
            .ok_or_else(|| Error::Domain("(0 : 0) is not a point".into()))?;
        let (pv, qv) = (self.p.eval(&x), self.q.eval(&x));
        let scale = self.p.eval_abs(&x) + self.q.eval_abs(&x);
        if pv.norm().max(qv.norm()) <= 1e-15 * scale {
            return Err(Error::Degenerate(format!(
                "P and Q both vanish numerically at ({}, {}): map is near the resultant locus",
                x.z, x.w
            )));
        }
        Homogeneous::new(pv, qv)
            .normalized()
            .ok_or_else(|| Error::Degenerate("P and Q both vanish".into()))
    }

    pub fn eval(&self, z: PlanePoint) -> Result<PlanePoint> {
        Ok(self.eval_homogeneous(&Homogeneous::from_plane(z))?.to_plane())
    }

    pub fn eval_sphere(&self, p: &SpherePoint) -> Result<SpherePoint> {
        Ok(self.eval_homogeneous(&Homogeneous::from_sphere(p))?.to_sphere())
    }

    /// The Wronskian P_z Q_w − P_w Q_z, a form of degree 2d − 2 whose roots
    /// are the critical points.
    pub fn wronskian(&self) -> HomPoly {
        let a = self.p.dz().mul(&self.q.dw());
        let b = self.p.dw().mul(&self.q.dz()).scale(C::new(-1.0, 0.0));
        a.add(&b)
    }

    /// |f'| measured in the spherical metric on both sides.
    pub fn spherical_derivative(&self, z: PlanePoint) -> f64 {
        let x = Homogeneous::from_plane(z);
        let j = self.wronskian().eval(&x).norm();
        let pv = self.p.eval(&x).norm_sqr();
        let qv = self.q.eval(&x).norm_sqr();
        j * (x.z.norm_sqr() + x.w.norm_sqr()) / (self.degree() as f64 * (pv + qv))
    }

    /// The 2d − 2 critical points with multiplicity.
    pub fn critical_points(&self) -> Result<Vec<PlanePoint>> {
        if self.degree() < 2 {
            return Ok(Vec::new());
        }
        Ok(self
            .wronskian()
            .roots()?
            .into_iter()
            .map(|h| h.to_plane())
            .collect())
    }

    /// Natural log of |Res(P, Q)|, from an LU factorization of the
    /// 2d × 2d Sylvester matrix. −∞ when P and Q share a root.
    pub fn log_resultant_magnitude(&self) -> f64 {
        let d = self.degree();
        let n = 2 * d;
        let mut s = DMatrix::<C>::zeros(n, n);
        for row in 0..d {
            for (k, c) in self.p.coeffs().iter().enumerate() {
                s[(row, row + k)] = *c;
            }
            for (k, c) in self.q.coeffs().iter().enumerate() {
                s[(d + row, row + k)] = *c;
            }
        }
        let lu = s.lu();
        let u = lu.u();
        (0..n).map(|i| u[(i, i)].norm().ln()).sum()
    }

    pub fn resultant_magnitude(&self) -> f64 {
        self.log_resultant_magnitude().exp()
    }

    /// self ∘ inner.
    pub fn compose(&self, inner: &RationalMap) -> Result<RationalMap> {
        let (d, e) = (self.degree(), inner.degree());
        if d * e > MAX_DEGREE {
            return Err(Error::Resource(format!(
                "composed degree {} exceeds the limit {MAX_DEGREE}",
                d * e
            )));
        }
        let mut p_pows = vec![HomPoly::new(vec![C::new(1.0, 0.0)])];
        let mut q_pows = vec![HomPoly::new(vec![C::new(1.0, 0.0)])];
        for k in 1..=d {
            p_pows.push(p_pows[k - 1].mul(&inner.p));
            q_pows.push(q_pows[k - 1].mul(&inner.q));
        }
        let substitute = |outer: &HomPoly| {
            let mut acc = HomPoly::zero(d * e);
            for (k, c) in outer.coeffs().iter().enumerate() {
                if *c != C::new(0.0, 0.0) {
                    acc = acc.add(&p_pows[d - k].mul(&q_pows[k]).scale(*c));
                }
            }
            acc
        };
        Ok(Self::from_forms(substitute(&self.p), substitute(&self.q)))
    }

    /// The n-th iterate; n = 0 gives the identity.
    pub fn iterate(&self, n: usize) -> Result<RationalMap> {
        let total = (self.degree() as f64).powi(n as i32);
        if total > MAX_DEGREE as f64 {
            return Err(Error::Resource(format!(
                "iterate degree {total} exceeds the limit {MAX_DEGREE}"
            )));
        }
        let mut g = RationalMap::identity();
        for _ in 0..n {
            g = self.compose(&g)?;
        }
        Ok(g)
    }

    /// M ∘ f ∘ M⁻¹.
    pub fn conjugate(&self, m: &Isometry) -> RationalMap {
        let outer = RationalMap::mobius(m);
        let inner = RationalMap::mobius(&m.inverse());
        // Degree is unchanged, so the guard cannot trigger.
        outer.compose(&self.compose(&inner).unwrap()).unwrap()
    }

    /// M ∘ f.
    pub fn post_compose(&self, m: &Isometry) -> RationalMap {
        RationalMap::mobius(m).compose(self).unwrap()
    }

    /// f ∘ M.
    pub fn pre_compose(&self, m: &Isometry) -> RationalMap {
        self.compose(&RationalMap::mobius(m)).unwrap()
    }

    /// Derivative at x of f read in the given source and target charts.
    fn chart_derivative(&self, x: &Homogeneous, src: Chart, tgt: Chart) -> C {
        let x = x.normalized().unwrap_or(*x);
        let j = self.wronskian().eval(&x);
        let (xs, mut sign) = match src {
            Chart::Finite => (x.w, 1.0),
            Chart::AtInfinity => (x.z, -1.0),
        };
        let den = match tgt {
            Chart::Finite => self.q.eval(&x),
            Chart::AtInfinity => {
                sign = -sign;
                self.p.eval(&x)
            }
        };
        j * xs * xs * sign / (self.degree() as f64 * den * den)
    }

    /// Product of chart derivatives around the orbit, each step read in
    /// the chart of the next point so the factors chain correctly.
    pub fn multiplier(&self, points: &[PlanePoint]) -> C {
        let hs: Vec<Homogeneous> = points.iter().map(|p| Homogeneous::from_plane(*p)).collect();
        let q = hs.len();
        (0..q)
            .map(|i| {
                let next = &hs[(i + 1) % q];
                self.chart_derivative(&hs[i], Chart::of(&hs[i]), Chart::of(next))
            })
            .product()
    }

    /// Checks f(z_i) = z_{i+1} (chordally) around the cycle.
    pub fn validate_cycle(&self, cycle: &PeriodicCycle) -> Result<()> {
        let q = cycle.points.len();
        if q == 0 || q != cycle.period {
            return Err(Error::Precondition("cycle length does not match its period".into()));
        }
        for i in 0..q {
            let image = self.eval(cycle.points[i])?;
            let gap = image.chordal(&cycle.points[(i + 1) % q]);
            if gap > CYCLE_TOL {
                return Err(Error::Precondition(format!(
                    "point {i} of the cycle maps {gap:e} away from its successor"
                )));
            }
        }
        Ok(())
    }

    /// log|(f^q)'(z_1)|, −∞ when a critical point lies on the cycle.
    pub fn cycle_length(&self, cycle: &PeriodicCycle) -> Result<f64> {
        self.validate_cycle(cycle)?;
        let crit = self.critical_points()?;
        let on_cycle = cycle
            .points
            .iter()
            .any(|p| crit.iter().any(|c| c.chordal(p) < CYCLE_TOL));
        let lambda = self.multiplier(&cycle.points);
        if on_cycle || lambda == C::new(0.0, 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(lambda.norm().ln())
    }

    /// All cycles of exact period q, found as the roots of the fixed-point
    /// form P_g w − Q_g z of g = f^q and grouped into orbits.
    pub fn find_cycles(&self, q: usize) -> Result<Vec<PeriodicCycle>> {
        if q == 0 || q > MAX_PERIOD {
            return Err(Error::Config(format!("period must be in 1..={MAX_PERIOD}")));
        }
        let g = self.iterate(q)?;
        let n = g.degree();
        let w = HomPoly::monomial(1, 1, C::new(1.0, 0.0));
        let z = HomPoly::monomial(1, 0, C::new(1.0, 0.0));
        let fixed_form = g.p.mul(&w).add(&g.q.mul(&z).scale(C::new(-1.0, 0.0)));
        debug_assert_eq!(fixed_form.degree(), n + 1);
        let roots: Vec<PlanePoint> = fixed_form.roots()?.into_iter().map(|h| h.to_plane()).collect();

        let mut used = vec![false; roots.len()];
        let mut cycles: Vec<PeriodicCycle> = Vec::new();
        for start in 0..roots.len() {
            if used[start] {
                continue;
            }
            used[start] = true;
            let x0 = roots[start];
            let mut orbit = vec![x0];
            let mut cur = x0;
            let mut primitive = true;
            for _ in 1..q {
                cur = self.eval(cur)?;
                if cur.chordal(&x0) < CYCLE_TOL {
                    primitive = false;
                    break;
                }
                // Prefer the polished root over the propagated image.
                let best = (0..roots.len())
                    .filter(|&k| !used[k])
                    .min_by(|&a, &b| roots[a].chordal(&cur).total_cmp(&roots[b].chordal(&cur)));
                match best {
                    Some(k) if roots[k].chordal(&cur) < COLLISION_TOL.max(CYCLE_TOL) => {
                        used[k] = true;
                        cur = roots[k];
                    }
                    _ => {}
                }
                orbit.push(cur);
            }
            if !primitive {
                continue;
            }
            let duplicate = cycles.iter().any(|c| {
                c.points
                    .iter()
                    .any(|p| orbit.iter().any(|o| p.chordal(o) < COLLISION_TOL))
            });
            if duplicate {
                log::warn!(
                    "period-{q} cycle points within {COLLISION_TOL:e} of each other near {:?}; \
                     treating as a parabolic collision",
                    x0
                );
                continue;
            }
            let multiplier = self.multiplier(&orbit);
            cycles.push(PeriodicCycle {
                points: orbit,
                period: q,
                multiplier,
            });
        }
        Ok(cycles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn pt(re: f64, im: f64) -> PlanePoint {
        PlanePoint::finite(re, im)
    }

    /// z(z − t)/(1 − t z)
    fn blaschke(t: f64) -> RationalMap {
        RationalMap::new(vec![c(1.0, 0.0), c(-t, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-t, 0.0), c(1.0, 0.0)])
            .unwrap()
    }

    #[test]
    fn evaluates_at_finite_points_poles_and_infinity() {
        let sq = RationalMap::power(2).unwrap();
        assert!(sq.eval(pt(3.0, 0.0)).unwrap().chordal(&pt(9.0, 0.0)) < 1e-15);
        assert_eq!(sq.eval(PlanePoint::Infinity).unwrap(), PlanePoint::Infinity);
        let b = blaschke(0.5);
        let one = b.eval(pt(1.0, 0.0)).unwrap().value().unwrap();
        assert!((one - c(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(b.eval(pt(2.0, 0.0)).unwrap(), PlanePoint::Infinity);
    }

    #[test]
    fn huge_arguments_do_not_overflow() {
        let f = RationalMap::polynomial(&[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let y = f.eval(pt(1e150, 0.0)).unwrap();
        assert!(y.is_infinite() || y.value().unwrap().norm() > 1e299);
        let s = f.eval_sphere(&crate::sphere::stereo_project(pt(1e150, 1e150))).unwrap();
        assert!(s.vector().z > 0.999_999);
    }

    #[test]
    fn spherical_derivative_of_square_at_one() {
        let sq = RationalMap::power(2).unwrap();
        assert!((sq.spherical_derivative(pt(1.0, 0.0)) - 2.0).abs() < 1e-14);
        assert_eq!(sq.spherical_derivative(PlanePoint::Infinity), 0.0);
    }

    #[test]
    fn critical_points_of_simple_maps() {
        let sq = RationalMap::power(2).unwrap();
        let crit = sq.critical_points().unwrap();
        assert!(crit.contains(&PlanePoint::Infinity));
        assert!(crit.iter().any(|p| p.chordal(&pt(0.0, 0.0)) < 1e-15));

        // z + 1/z = (z² + w²)/(zw)
        let f = RationalMap::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        let crit = f.critical_points().unwrap();
        assert_eq!(crit.len(), 2);
        for target in [pt(1.0, 0.0), pt(-1.0, 0.0)] {
            assert!(crit.iter().any(|p| p.chordal(&target) < 1e-12));
        }
    }

    #[test]
    fn blaschke_critical_points_match_grid_minimization() {
        let f = blaschke(0.5);
        let crit = f.critical_points().unwrap();
        assert_eq!(crit.len(), 2);
        // Oracle: coarse grid on the real axis then golden-section polish
        // of the spherical derivative, which vanishes at both points.
        let g = |x: f64| f.spherical_derivative(pt(x, 0.0));
        let mut found = Vec::new();
        let grid: Vec<f64> = (0..=4000).map(|k| -10.0 + 20.0 * k as f64 / 4000.0).collect();
        for w in grid.windows(3) {
            if g(w[1]) < g(w[0]) && g(w[1]) < g(w[2]) {
                let (mut a, mut b) = (w[0], w[2]);
                for _ in 0..200 {
                    let m1 = a + (b - a) * 0.382;
                    let m2 = a + (b - a) * 0.618;
                    if g(m1) < g(m2) {
                        b = m2;
                    } else {
                        a = m1;
                    }
                }
                found.push(0.5 * (a + b));
            }
        }
        assert_eq!(found.len(), 2, "{found:?}");
        for x in &found {
            assert!(crit.iter().any(|p| p.chordal(&pt(*x, 0.0)) < 1e-6));
        }
        // Symmetric under reflection in the unit circle.
        let a = crit[0].value().unwrap();
        let b = crit[1].value().unwrap();
        assert!((a * b.conj() - c(1.0, 0.0)).norm() < 1e-10);
        for p in crit {
            assert!(f.spherical_derivative(p) < 1e-6);
        }
    }

    #[test]
    fn resultant_examples() {
        let sq = RationalMap::power(2).unwrap();
        assert!((sq.resultant_magnitude() - 1.0).abs() < 1e-14);
        let shared = RationalMap::new(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(shared, Err(Error::Degenerate(_))));
        let cc = 1e3;
        let f = RationalMap::polynomial(&[c(1.0, 0.0), c(0.0, 0.0), c(cc, 0.0)]).unwrap();
        assert!((f.resultant_magnitude() / cc.powi(-4) - 1.0).abs() < 1e-10);
        // Rescaling the input by λ leaves the normalized resultant alone.
        let g = RationalMap::new(vec![c(0.0, 7.0), c(0.0, 0.0), c(0.0, 7e3)], vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 7.0)])
            .unwrap();
        assert!((g.resultant_magnitude() / f.resultant_magnitude() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn composition_and_iteration() {
        let sq = RationalMap::power(2).unwrap();
        assert_eq!(sq.iterate(2).unwrap(), RationalMap::power(4).unwrap());
        assert_eq!(sq.compose(&RationalMap::identity()).unwrap(), sq);
        let f = RationalMap::polynomial(&[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let f2 = f.iterate(2).unwrap();
        assert_eq!(f2.degree(), 4);
        for z in [pt(0.3, -0.2), pt(2.0, 1.0), pt(-1.5, 0.0)] {
            let zv = z.value().unwrap();
            let direct = (zv * zv + 1.0) * (zv * zv + 1.0) + 1.0;
            assert!(f2.eval(z).unwrap().chordal(&direct.into()) < 1e-12);
        }
        assert!(matches!(RationalMap::power(5).unwrap().iterate(3), Err(Error::Resource(_))));
    }

    #[test]
    fn fixed_points_of_square() {
        let sq = RationalMap::power(2).unwrap();
        let cycles = sq.find_cycles(1).unwrap();
        assert_eq!(cycles.len(), 3);
        for target in [pt(0.0, 0.0), pt(1.0, 0.0), PlanePoint::Infinity] {
            assert!(cycles.iter().any(|cy| cy.points[0].chordal(&target) < 1e-12));
        }
        let one = cycles.iter().find(|cy| cy.points[0].chordal(&pt(1.0, 0.0)) < 1e-9).unwrap();
        assert!((sq.cycle_length(one).unwrap() - 2f64.ln()).abs() < 1e-12);
        let inf = cycles.iter().find(|cy| cy.points[0].is_infinite()).unwrap();
        assert_eq!(sq.cycle_length(inf).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn two_cycles() {
        let basilica = RationalMap::polynomial(&[c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let cycles = basilica.find_cycles(2).unwrap();
        let sc = cycles
            .iter()
            .find(|cy| cy.points.iter().any(|p| p.chordal(&pt(0.0, 0.0)) < 1e-9))
            .unwrap();
        assert!(sc.points.iter().any(|p| p.chordal(&pt(-1.0, 0.0)) < 1e-9));
        assert!(sc.multiplier.norm() < 1e-12);
        assert_eq!(basilica.cycle_length(sc).unwrap(), f64::NEG_INFINITY);

        // Oracle for z²: the orbit of e^{2πi/3} computed directly, and the
        // chain rule 2 z_1 · 2 z_2.
        let sq = RationalMap::power(2).unwrap();
        let cycles = sq.find_cycles(2).unwrap();
        assert_eq!(cycles.len(), 1);
        let w = C::from_polar(1.0, std::f64::consts::TAU / 3.0);
        let cy = &cycles[0];
        assert!(cy.points.iter().any(|p| p.chordal(&w.into()) < 1e-10));
        assert!(cy.points.iter().any(|p| p.chordal(&(w * w).into()) < 1e-10));
        let chain = 2.0 * w * 2.0 * (w * w);
        assert!((cy.multiplier - chain).norm() < 1e-9);
        assert!((cy.multiplier - c(4.0, 0.0)).norm() < 1e-9);
        sq.validate_cycle(cy).unwrap();
    }

    #[test]
    fn cycle_length_is_chart_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = RationalMap::random(3, 1e-4, &mut rng);
            let m = Isometry::random(&mut rng);
            let g = f.conjugate(&m);
            for cy in f.find_cycles(1).unwrap() {
                let moved = PeriodicCycle {
                    points: cy.points.iter().map(|p| m.apply_boundary(*p)).collect(),
                    period: 1,
                    multiplier: C::new(0.0, 0.0),
                };
                let (a, b) = (f.cycle_length(&cy).unwrap(), g.cycle_length(&moved).unwrap());
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let f = blaschke(0.3);
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.starts_with("{\"P\":"));
        let g: RationalMap = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        assert!(serde_json::from_str::<RationalMap>(r#"{"P":[[1,0]],"Q":[[1,0]]}"#).is_err());
    }
}
