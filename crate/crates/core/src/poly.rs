//! Binary forms (homogeneous polynomials in (z, w)) and their roots on Ĉ.
//!
//! Roots are found with the Aberth–Ehrlich simultaneous iteration started
//! from Newton-polygon radii, followed by a Newton polish. Exact zero
//! leading or trailing coefficients are read off as roots at ∞ or 0.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sphere::Homogeneous;

type C = Complex64;

const ZERO: C = C { re: 0.0, im: 0.0 };
const ONE: C = C { re: 1.0, im: 0.0 };

/// Σ c_k z^{n−k} w^k with coefficients listed from z^n down to w^n.
#[derive(Clone, Debug, PartialEq)]
pub struct HomPoly {
    coeffs: Vec<C>,
}

impl HomPoly {
    /// Panics on an empty coefficient list (degree would be undefined).
    pub fn new(coeffs: Vec<C>) -> Self {
        assert!(!coeffs.is_empty(), "a binary form needs at least one coefficient");
        Self { coeffs }
    }

    pub fn zero(degree: usize) -> Self {
        Self::new(vec![ZERO; degree + 1])
    }

    pub fn monomial(degree: usize, w_power: usize, c: C) -> Self {
        let mut p = Self::zero(degree);
        p.coeffs[w_power] = c;
        p
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    pub fn scale(&self, k: C) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Sum of two forms of the same degree.
    pub fn add(&self, other: &HomPoly) -> Self {
        assert_eq!(self.degree(), other.degree(), "degree mismatch in sum");
        Self::new(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn mul(&self, other: &HomPoly) -> Self {
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut acc = Self::new(vec![ONE]);
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// ∂/∂z.
    pub fn dz(&self) -> Self {
        let n = self.degree();
        if n == 0 {
            return Self::new(vec![ZERO]);
        }
        Self::new(
            (0..n)
                .map(|k| self.coeffs[k] * (n - k) as f64)
                .collect(),
        )
    }

    /// ∂/∂w.
    pub fn dw(&self) -> Self {
        let n = self.degree();
        if n == 0 {
            return Self::new(vec![ZERO]);
        }
        Self::new((1..=n).map(|k| self.coeffs[k] * k as f64).collect())
    }

    /// Value at (z : w). For inputs with max(|z|, |w|) ≤ 1 no intermediate
    /// exceeds the coefficient sum, so nothing overflows.
    pub fn eval(&self, p: &Homogeneous) -> C {
        let n = self.degree() as i32;
        if p.z.norm() >= p.w.norm() {
            let v = p.w / p.z;
            let mut acc = ZERO;
            for c in self.coeffs.iter().rev() {
                acc = acc * v + c;
            }
            acc * p.z.powi(n)
        } else {
            let u = p.z / p.w;
            let mut acc = ZERO;
            for c in &self.coeffs {
                acc = acc * u + c;
            }
            acc * p.w.powi(n)
        }
    }

    /// Σ |c_k| |z|^{n−k} |w|^k, the scale against which a value is small.
    pub fn eval_abs(&self, p: &Homogeneous) -> f64 {
        let n = self.degree();
        let (az, aw) = (p.z.norm(), p.w.norm());
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.norm() * az.powi((n - k) as i32) * aw.powi(k as i32))
            .sum()
    }

    /// The roots on Ĉ with multiplicity (exactly `degree()` of them).
    /// Fails on the zero form.
    pub fn roots(&self) -> Result<Vec<Homogeneous>> {
        if self.is_zero() {
            return Err(Error::Degenerate("the zero form has no isolated roots".into()));
        }
        let n = self.degree();
        let lead_zeros = self.coeffs.iter().take_while(|c| **c == ZERO).count();
        let trail_zeros = self.coeffs.iter().rev().take_while(|c| **c == ZERO).count();
        let mut roots = Vec::with_capacity(n);
        roots.extend(std::iter::repeat_n(Homogeneous::INFINITY, lead_zeros));
        roots.extend(std::iter::repeat_n(Homogeneous::new(ZERO, ONE), trail_zeros));
        let core: Vec<C> = self.coeffs[lead_zeros..=n - trail_zeros].to_vec();
        if core.len() > 1 {
            for z in aberth(&core)? {
                roots.push(Homogeneous::from_plane(z.into()));
            }
        }
        debug_assert_eq!(roots.len(), n);
        Ok(roots)
    }
}

/// Value and derivative ratio p(z)/p'(z) for p with coefficients in
/// descending powers, evaluated in whichever of z or 1/z keeps powers
/// bounded.
fn newton_ratio(desc: &[C], z: C) -> (C, f64) {
    let n = desc.len() - 1;
    if z.norm() <= 1.0 {
        let (mut p, mut dp) = (ZERO, ZERO);
        for c in desc {
            dp = dp * z + p;
            p = p * z + c;
        }
        let scale: f64 = desc
            .iter()
            .enumerate()
            .map(|(k, c)| c.norm() * z.norm().powi((n - k) as i32))
            .sum();
        (p / dp, p.norm() / scale)
    } else {
        // p(z) = z^n q(u), u = 1/z, q(u) = Σ c_k u^k; then
        // p/p' = z / (n − u q'(u)/q(u)).
        let u = z.inv();
        let (mut q, mut dq) = (ZERO, ZERO);
        for c in desc.iter().rev() {
            dq = dq * u + q;
            q = q * u + c;
        }
        let scale: f64 = desc
            .iter()
            .enumerate()
            .map(|(k, c)| c.norm() * u.norm().powi(k as i32))
            .sum();
        (z / (n as f64 - u * dq / q), q.norm() / scale)
    }
}

/// Initial radii from the upper convex hull of (j, log|b_j|), b_j the
/// coefficient of z^j.
fn newton_polygon_radii(desc: &[C]) -> Vec<f64> {
    let n = desc.len() - 1;
    let logs: Vec<(usize, f64)> = (0..=n)
        .filter_map(|j| {
            let c = desc[n - j].norm();
            (c > 0.0).then(|| (j, c.ln()))
        })
        .collect();
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &pt in &logs {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 as f64 - a.0 as f64) * (pt.1 - a.1)
                - (b.1 - a.1) * (pt.0 as f64 - a.0 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let mut radii = Vec::with_capacity(n);
    for seg in hull.windows(2) {
        let (j1, l1) = seg[0];
        let (j2, l2) = seg[1];
        let r = ((l1 - l2) / (j2 - j1) as f64).exp();
        radii.extend(std::iter::repeat_n(r, j2 - j1));
    }
    radii
}

const ABERTH_MAX_ITER: usize = 1000;
const ROOT_BACKWARD_TOL: f64 = 1e-11;

/// All roots of the polynomial with coefficients `desc` (descending
/// powers, nonzero leading and trailing coefficient).
pub fn aberth(desc: &[C]) -> Result<Vec<C>> {
    let n = desc.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![-desc[1] / desc[0]]);
    }
    let radii = newton_polygon_radii(desc);
    let mut z: Vec<C> = radii
        .iter()
        .enumerate()
        .map(|(k, r)| C::from_polar(*r, TAU * k as f64 / n as f64 + 0.4))
        .collect();
    let mut converged = vec![false; n];
    for _ in 0..ABERTH_MAX_ITER {
        for i in 0..n {
            if converged[i] {
                continue;
            }
            let (ratio, _) = newton_ratio(desc, z[i]);
            let repulsion: C = (0..n)
                .filter(|&j| j != i)
                .map(|j| (z[i] - z[j]).inv())
                .sum();
            let step = ratio / (ONE - ratio * repulsion);
            if !step.re.is_finite() || !step.im.is_finite() {
                converged[i] = true;
                continue;
            }
            z[i] -= step;
            if step.norm() <= 4.0 * f64::EPSILON * z[i].norm() {
                converged[i] = true;
            }
        }
        if converged.iter().all(|c| *c) {
            break;
        }
    }
    // Newton polish on each root; keep the polished value only if the
    // backward error improves.
    let mut worst: f64 = 0.0;
    for zi in z.iter_mut() {
        let (_, mut err) = newton_ratio(desc, *zi);
        for _ in 0..3 {
            let (ratio, _) = newton_ratio(desc, *zi);
            let cand = *zi - ratio;
            let (_, cand_err) = newton_ratio(desc, cand);
            if cand_err.is_finite() && cand_err < err {
                *zi = cand;
                err = cand_err;
            } else {
                break;
            }
        }
        worst = worst.max(err);
    }
    if !(worst <= ROOT_BACKWARD_TOL) {
        return Err(Error::numeric("Aberth iteration did not converge", worst));
    }
    Ok(z)
}
