//! The explicit degree-two computations: the radial defect δ(r) of E(z²)
//! in cylindrical coordinates, the Blaschke family f_t = z(z − t)/(1 − tz)
//! and the contour integral J_t(r) whose sign places E f_t(0).

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::Serialize;

use super::{extend, ExtensionResult, SolverOptions};
use crate::error::{Error, Result};
use crate::h3::{from_cylindrical, to_cylindrical, BallPoint, CylindricalPoint};
use crate::rational::RationalMap;
use crate::sphere::QuadratureRule;

type C = Complex64;

/// δ(r) = log cosh r − (radial coordinate of E(z²) at (r, 0, 0)) on a grid.
#[derive(Clone, Debug, Serialize)]
pub struct DeltaCurve {
    pub points: Vec<(f64, f64)>,
    /// δ > 0 at every grid point r ≥ 0.1.
    pub positive: bool,
    /// δ at the largest grid point is below δ(1) (only meaningful when the
    /// grid contains 1 and something larger).
    pub decaying: Option<bool>,
}

pub fn delta_curve(grid: &[f64], rule: &QuadratureRule, opts: &SolverOptions) -> Result<DeltaCurve> {
    if grid.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::Domain("δ grid must be positive and finite".into()));
    }
    let sq = RationalMap::power(2)?;
    let mut points = Vec::with_capacity(grid.len());
    for &r in grid {
        let x = from_cylindrical(&CylindricalPoint::new(r, 0.0, 0.0)?)?;
        let y = extend(&sq, &x, rule, opts)?;
        let c = to_cylindrical(&y.point);
        points.push((r, log_cosh(r) - c.r));
    }
    let positive = points.iter().filter(|(r, _)| *r >= 0.1).all(|(_, d)| *d > 0.0);
    let at_one = points.iter().find(|(r, _)| (*r - 1.0).abs() < 1e-12);
    let last = points
        .iter()
        .copied()
        .fold(None, |acc: Option<(f64, f64)>, p| match acc {
            Some(a) if a.0 >= p.0 => Some(a),
            _ => Some(p),
        });
    let decaying = match (at_one, last) {
        (Some(one), Some(last)) if last.0 > 1.0 => Some(last.1 < one.1),
        _ => None,
    };
    Ok(DeltaCurve {
        points,
        positive,
        decaying,
    })
}

/// log cosh r without overflow.
pub(crate) fn log_cosh(r: f64) -> f64 {
    let a = r.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// z(z − t)/(1 − tz).
pub fn blaschke_family(t: f64) -> Result<RationalMap> {
    RationalMap::new(
        vec![C::new(1.0, 0.0), C::new(-t, 0.0), C::new(0.0, 0.0)],
        vec![C::new(0.0, 0.0), C::new(-t, 0.0), C::new(1.0, 0.0)],
    )
}

/// E f_t(0) and its cylindrical coordinates.
pub fn kappa(t: f64, rule: &QuadratureRule, opts: &SolverOptions) -> Result<(ExtensionResult, CylindricalPoint)> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!("t = {t} is outside (0, 1)")));
    }
    let f = blaschke_family(t)?;
    let y = extend(&f, &BallPoint::origin(), rule, opts)?;
    let c = to_cylindrical(&y.point);
    Ok((y, c))
}

/// Both evaluations of J_t(r).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LemmaA2 {
    pub t: f64,
    pub r: f64,
    pub numeric: f64,
    pub residue: f64,
    /// Trapezoid nodes used by the converged contour integral.
    pub nodes: usize,
}

/// G(r) = r(1 − tr)² + r³(r − t)², positive for t ∈ (0, 1), r > 0.
pub fn lemma_a2_g(t: f64, r: f64) -> f64 {
    r * (1.0 - t * r).powi(2) + r.powi(3) * (r - t).powi(2)
}

/// J_t(r) two ways: the trapezoid rule on |z| = r applied to the
/// x-component integrand 2f/(1 + |f|²) · 4/(1 + r²)² · r, and the residue
/// of F/G at the root x₁ of G inside the disk.
pub fn lemma_a2_check(t: f64, r: f64) -> Result<LemmaA2> {
    if !(t > 0.0 && t < 1.0) || !(r > 0.0) || (r - 1.0).abs() <= 1e-3 {
        return Err(Error::Domain(format!(
            "need t in (0, 1) and r > 0 away from 1, got t = {t}, r = {r}"
        )));
    }
    let r2 = r * r;
    // G(z) = a z² + b z + c.
    let a = -t * (1.0 + r2);
    let b = 1.0 + 2.0 * t * t * r2 + r2 * r2;
    let c = -t * r2 * (1.0 + r2);
    let disc = b * b - 4.0 * a * c;
    if !(disc > 0.0) {
        return Err(Error::Internal(format!("G has no real roots (discriminant {disc})")));
    }
    let x2 = (b + disc.sqrt()) / (2.0 * t * (1.0 + r2));
    let x1 = r2 / x2;
    if !(x1 < r && r < x2) {
        return Err(Error::Internal(format!(
            "root ordering x1 < r < x2 violated: {x1}, {r}, {x2}"
        )));
    }
    let lo = t.min(t * r2);
    let hi = t.max(t * r2);
    if !(lo < x1 && x1 < hi) {
        return Err(Error::Internal(format!("x1 = {x1} is not between t and t r²")));
    }
    let big_f = (x1 - t) * (x1 - t * r2);
    let residue = 16.0 * r * PI / (1.0 + r2).powi(2) * big_f / (-t * (1.0 + r2) * (x1 - x2));

    let integrand = |theta: f64| -> C {
        let z = C::from_polar(r, theta);
        // 2f/(1 + |f|²) = 2 P Q̄ / (|Q|² + |P|²) stays bounded at the pole 1/t.
        let p = z * (z - t);
        let q = 1.0 - t * z;
        2.0 * p * q.conj() / (q.norm_sqr() + p.norm_sqr()) * 4.0 / (1.0 + r2).powi(2) * r
    };
    let trapezoid = |n: usize| -> C {
        let h = TAU / n as f64;
        (0..n).map(|k| integrand(h * k as f64)).sum::<C>() * h
    };
    let mut n = 64;
    let mut prev = trapezoid(n);
    loop {
        n *= 2;
        let cur = trapezoid(n);
        if (cur - prev).norm() <= 1e-15 * (1.0 + cur.norm()) || n >= 1 << 22 {
            if cur.im.abs() > 1e-10 * (1.0 + cur.re.abs()) {
                return Err(Error::Internal(format!(
                    "contour integral has imaginary part {}",
                    cur.im
                )));
            }
            return Ok(LemmaA2 {
                t,
                r,
                numeric: cur.re,
                residue,
                nodes: n,
            });
        }
        prev = cur;
    }
}
