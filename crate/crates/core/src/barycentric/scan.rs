//! Sampling the hyperbolic operator norm of D E f over H³.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derivative_by, hyperbolic_operator_norm, SolverOptions};
use crate::error::{Error, Result};
use crate::h3::{mx_translation, BallPoint, Isometry};
use crate::rational::RationalMap;
use crate::sphere::{Homogeneous, PlanePoint, QuadratureRule, SpherePoint, Vec3};

/// 27 / (2 log 3), the universal constant in the Lipschitz bound.
pub const LIPSCHITZ_CONSTANT: f64 = 12.288_229_559_462_303;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanOptions {
    /// Random samples are stratified in hyperbolic radius on [0, max_radius].
    pub max_radius: f64,
    /// Depth range for samples on geodesics between critical points and on
    /// rays toward them.
    pub critical_depth: f64,
    pub histogram_bins: usize,
    /// Use the adaptive re-solve at every sample; off by default, which
    /// keeps scans at the plain product rule.
    pub refine: bool,
    /// Deep samples whose solve stalls at a round-off floor below this are
    /// re-solved at this tolerance and flagged as relaxed.
    pub relaxed_tolerance: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            max_radius: 20.0,
            critical_depth: 10.0,
            histogram_bins: 24,
            refine: false,
            relaxed_tolerance: 1e-7,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzSample {
    pub point: [f64; 3],
    pub depth: f64,
    pub kind: &'static str,
    /// `None` when the solver failed at this point.
    pub norm: Option<f64>,
    /// Solved at the relaxed tolerance.
    pub relaxed: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzReport {
    pub degree: usize,
    pub max_norm: f64,
    pub argmax: Option<[f64; 3]>,
    pub histogram: Vec<HistogramBin>,
    pub failures: usize,
    pub relaxed: usize,
    /// 27 d / (2 log 3).
    pub bound: f64,
    pub within_bound: bool,
    /// Whether the sampled maximum stays below d.
    pub below_degree: bool,
    pub samples: Vec<LipschitzSample>,
}

/// The isometry carrying 0 to a and ∞ to b (a ≠ b).
fn geodesic_frame(a: &PlanePoint, b: &PlanePoint) -> Option<Isometry> {
    let ha = Homogeneous::from_plane(*a);
    let hb = Homogeneous::from_plane(*b);
    Isometry::from_matrix(hb.z, ha.z, hb.w, ha.w).ok()
}

fn sample_points(
    f: &RationalMap,
    count: usize,
    seed: u64,
    opts: &ScanOptions,
) -> Result<Vec<(Isometry, &'static str)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let radius = opts.max_radius * (i as f64 + rng.gen::<f64>()) / count as f64;
        let dir = loop {
            let v = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                break SpherePoint::new(v / n)?;
            }
        };
        out.push((mx_translation(&BallPoint::at_distance(&dir, radius)?), "stratified"));
    }
    let crit = f.critical_points()?;
    let steps = 9;
    for (i, a) in crit.iter().enumerate() {
        let dir = crate::sphere::stereo_project(*a);
        for k in 1..=steps {
            let depth = opts.critical_depth * k as f64 / steps as f64;
            out.push((mx_translation(&BallPoint::at_distance(&dir, depth)?), "critical_ray"));
        }
        for b in crit.iter().skip(i + 1) {
            if a.chordal(b) < 1e-6 {
                continue;
            }
            if let Some(frame) = geodesic_frame(a, b) {
                for k in 0..steps {
                    let h = opts.critical_depth * (2.0 * k as f64 / (steps - 1) as f64 - 1.0);
                    out.push((frame * Isometry::axial_translation(h), "critical_geodesic"));
                }
            }
        }
    }
    Ok(out)
}

/// Operator norms of D E f at stratified random points and along critical
/// geodesics. Solver failures are counted, not fatal. The result depends
/// only on (f, sample_count, seed), not on the number of worker threads.
pub fn lipschitz_scan(
    f: &RationalMap,
    sample_count: usize,
    seed: u64,
    rule: &QuadratureRule,
    solver: &SolverOptions,
    opts: &ScanOptions,
) -> Result<LipschitzReport> {
    let points = sample_points(f, sample_count, seed, opts)?;
    let solver = if opts.refine { *solver } else { solver.fixed_rule() };
    let solver = &solver;
    let samples: Vec<LipschitzSample> = points
        .par_iter()
        .map(|(x, kind)| {
            let p = x.origin_image().map(|b| b.vector()).unwrap_or_else(|_| Vec3::zeros());
            let depth = x.origin_image().map(|b| b.depth()).unwrap_or(f64::NAN);
            let (norm, relaxed) = match derivative_by(f, x, rule, solver) {
                Ok(d) => (Some(hyperbolic_operator_norm(&d)), false),
                Err(Error::Numeric { residual, .. }) if residual <= opts.relaxed_tolerance => {
                    let loose = SolverOptions {
                        tolerance: opts.relaxed_tolerance,
                        ..*solver
                    };
                    let norm = derivative_by(f, x, rule, &loose).ok().map(|d| hyperbolic_operator_norm(&d));
                    (norm, norm.is_some())
                }
                Err(_) => (None, false),
            };
            LipschitzSample {
                point: [p.x, p.y, p.z],
                depth,
                kind,
                norm,
                relaxed,
            }
        })
        .collect();

    let d = f.degree() as f64;
    let mut max_norm = 0.0;
    let mut argmax = None;
    let mut failures = 0;
    for s in &samples {
        match s.norm {
            Some(n) if n > max_norm => {
                max_norm = n;
                argmax = Some(s.point);
            }
            Some(_) => {}
            None => failures += 1,
        }
    }
    let bins = opts.histogram_bins.max(1);
    let top = 3.0 * d;
    let mut histogram: Vec<HistogramBin> = (0..bins)
        .map(|k| HistogramBin {
            lo: top * k as f64 / bins as f64,
            hi: top * (k + 1) as f64 / bins as f64,
            count: 0,
        })
        .collect();
    histogram.push(HistogramBin {
        lo: top,
        hi: f64::INFINITY,
        count: 0,
    });
    for n in samples.iter().filter_map(|s| s.norm) {
        let k = ((n / top) * bins as f64).floor();
        let k = if k.is_finite() && k >= 0.0 { (k as usize).min(bins) } else { bins };
        histogram[k].count += 1;
    }
    let bound = LIPSCHITZ_CONSTANT * d;
    Ok(LipschitzReport {
        degree: f.degree(),
        max_norm,
        argmax,
        histogram,
        failures,
        relaxed: samples.iter().filter(|s| s.relaxed).count(),
        bound,
        within_bound: max_norm <= bound * (1.0 + 1e-3),
        below_degree: max_norm <= d,
        samples,
    })
}
