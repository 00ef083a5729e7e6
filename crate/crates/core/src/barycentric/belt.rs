//! Measure of the preimage of the belt {1/√3 < |z| < √3}.
//!
//! Membership is discontinuous, so node sums converge slowly. Instead each
//! meridian z = ρ e^{iφ} is cut exactly at the real roots of
//! |P|² − R²|Q|² in ρ; on the meridian the height (ρ² − 1)/(ρ² + 1) is
//! uniformly distributed, so each piece contributes half its height span.
//! The azimuthal average uses the midpoint rule.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use super::{center_offset, SolverOptions};
use crate::error::{Error, Result};
use crate::poly::aberth;
use crate::rational::RationalMap;
use crate::sphere::{Homogeneous, QuadratureRule};

type C = Complex64;

pub const BELT_INNER: f64 = 0.577_350_269_189_625_8; // 1/√3
pub const BELT_OUTER: f64 = 1.732_050_807_568_877_2; // √3

/// The lower bound 16 log 3 / (81 d) on the belt volume of a recentered
/// degree-d map.
pub fn belt_bound(degree: usize) -> f64 {
    16.0 * 3f64.ln() / (81.0 * degree as f64)
}

/// V: belt, V1: inner cap {|f| ≤ 1/√3}, V2: outer cap {|f| ≥ √3}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BeltVolume {
    pub v: f64,
    pub v1: f64,
    pub v2: f64,
}

/// Belt volumes for a map already recentered so E f(0) = 0 (checked to
/// 1e−6). The meridian count is 32 times the rule's azimuthal count.
pub fn belt_volume(f: &RationalMap, rule: &QuadratureRule, opts: &SolverOptions) -> Result<BeltVolume> {
    let offset = center_offset(f, rule, opts)?;
    if offset > 1e-6 {
        return Err(Error::Precondition(format!(
            "E f(0) is {offset:e} from the origin; recenter first"
        )));
    }
    Ok(belt_volume_unchecked(f, 32 * rule.azimuthal_count()))
}

/// Coefficients (descending in ρ) of |P(ρe^{iφ})|² − R²|Q(ρe^{iφ})|².
fn level_polynomial(f: &RationalMap, phi: f64, r: f64) -> Vec<C> {
    let d = f.degree();
    let e = C::from_polar(1.0, phi);
    // Ascending in ρ: coefficient of z^k sits at index d − k.
    let asc = |coeffs: &[C]| -> Vec<C> { (0..=d).map(|k| coeffs[d - k] * e.powi(k as i32)).collect() };
    let pa = asc(f.p().coeffs());
    let qa = asc(f.q().coeffs());
    let mut out = vec![0.0f64; 2 * d + 1];
    for j in 0..=d {
        for k in 0..=d {
            out[j + k] += (pa[j] * pa[k].conj()).re - r * r * (qa[j] * qa[k].conj()).re;
        }
    }
    out.iter().rev().map(|x| C::new(*x, 0.0)).collect()
}

fn height(rho: f64) -> f64 {
    if rho.is_infinite() {
        1.0
    } else {
        (rho * rho - 1.0) / (rho * rho + 1.0)
    }
}

/// Positive real roots of a real polynomial (descending), sorted. Near-real
/// complex roots are included; the caller classifies by sampling.
fn positive_real_roots(desc: &[C]) -> Vec<f64> {
    let lead = desc.iter().position(|c| c.norm() > 0.0);
    let Some(lead) = lead else { return Vec::new() };
    let mut core = desc[lead..].to_vec();
    while core.len() > 1 && core.last().map(|c| c.norm() == 0.0).unwrap_or(false) {
        core.pop();
    }
    if core.len() < 2 {
        return Vec::new();
    }
    let roots = match aberth(&core) {
        Ok(r) => r,
        Err(_) => return sampled_roots(&core),
    };
    let mut out: Vec<f64> = roots
        .into_iter()
        .filter(|z| z.re > 0.0 && z.im.abs() <= 1e-7 * (1.0 + z.norm()))
        .map(|z| z.re)
        .collect();
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

/// Fallback when the root finder fails: sign changes of p(ρ)/(1 + ρ²)^{n/2}
/// on a fine height grid, refined by bisection.
fn sampled_roots(desc: &[C]) -> Vec<f64> {
    let n = desc.len() - 1;
    let eval = |h: f64| -> f64 {
        // ρ = √((1 + h)/(1 − h)); evaluate in ρ or 1/ρ to stay bounded.
        let rho = ((1.0 + h) / (1.0 - h)).sqrt();
        let scale = (1.0 + rho * rho).powf(-0.5 * n as f64);
        if rho <= 1.0 {
            desc.iter().fold(0.0, |acc, c| acc * rho + c.re) * scale
        } else {
            let u = 1.0 / rho;
            let s = desc.iter().rev().fold(0.0, |acc, c| acc * u + c.re);
            s * (1.0 + u * u).powf(-0.5 * n as f64)
        }
    };
    const SAMPLES: usize = 4096;
    let hs: Vec<f64> = (0..=SAMPLES)
        .map(|k| -1.0 + 2.0 * (k as f64 + 0.5) / (SAMPLES as f64 + 1.0))
        .collect();
    let mut out = Vec::new();
    for w in hs.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (fa, fb) = (eval(a), eval(b));
        if fa == 0.0 || fa * fb > 0.0 {
            continue;
        }
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if eval(m) * fa > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        let h = 0.5 * (a + b);
        out.push(((1.0 + h) / (1.0 - h)).sqrt());
    }
    out
}

/// |f(ρ e^{iφ})| classified against the two belt radii: 0 inner cap,
/// 1 belt, 2 outer cap. Boundary values count as belt.
fn classify(f: &RationalMap, z: C) -> usize {
    let h = Homogeneous::from_plane(z.into());
    let pv = f.p().eval(&h).norm();
    let qv = f.q().eval(&h).norm();
    if pv < BELT_INNER * qv {
        0
    } else if pv > BELT_OUTER * qv {
        2
    } else {
        1
    }
}

/// Belt volumes by exact meridian cuts over `meridians` azimuths.
pub fn belt_volume_unchecked(f: &RationalMap, meridians: usize) -> BeltVolume {
    let mut acc = [0.0f64; 3];
    for k in 0..meridians {
        let phi = TAU * (k as f64 + 0.5) / meridians as f64;
        let mut cuts = positive_real_roots(&level_polynomial(f, phi, BELT_INNER));
        cuts.extend(positive_real_roots(&level_polynomial(f, phi, BELT_OUTER)));
        cuts.sort_by(|a, b| a.total_cmp(b));
        let mut edges = vec![0.0];
        edges.extend(cuts);
        edges.push(f64::INFINITY);
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let span = 0.5 * (height(b) - height(a));
            if span <= 0.0 {
                continue;
            }
            // Sample the piece at its height midpoint.
            let hm = 0.5 * (height(a) + height(b));
            let rho = ((1.0 + hm) / (1.0 - hm)).sqrt();
            acc[classify(f, C::from_polar(rho, phi))] += span;
        }
    }
    let n = meridians as f64;
    BeltVolume {
        v1: acc[0] / n,
        v: acc[1] / n,
        v2: acc[2] / n,
    }
}
