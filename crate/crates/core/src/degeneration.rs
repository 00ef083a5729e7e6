//! Degenerating families at desk scale: preimages of the origin under
//! E f, the rescaling radius, cycle lengths against displacements along
//! rays, and the gap between E(f^N) and (E f)^N.

use std::cmp::Ordering;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barycentric::{barycenter, derivative_by, extend_by, extend_frame_by, SolverOptions, WeightedSpherePoints};
use crate::error::{Error, Result};
use crate::h3::{hyp_dist, mx_translation, BallPoint, Isometry};
use crate::rational::{PeriodicCycle, RationalMap};
use crate::sphere::{stereo_project, Homogeneous, PlanePoint, QuadratureRule, SpherePoint, Vec3};

type C = Complex64;

/// How a family member is built from its parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyKind {
    /// z² + c.
    QuadraticPlusC,
    /// a z^d.
    ScaledPower { degree: usize },
    /// a z.
    Linear,
    /// M ∘ f_c ∘ M⁻¹ for a fixed Möbius M given by its matrix
    /// [[a, b], [c, d]] as [re, im] pairs.
    Conjugated {
        inner: Box<FamilyKind>,
        matrix: [[f64; 2]; 4],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub label: String,
    pub kind: FamilyKind,
    /// Parameters as [re, im].
    pub parameters: Vec<[f64; 2]>,
}

impl FamilyKind {
    pub fn instantiate(&self, param: C) -> Result<RationalMap> {
        let zero = C::new(0.0, 0.0);
        let one = C::new(1.0, 0.0);
        match self {
            FamilyKind::QuadraticPlusC => RationalMap::polynomial(&[one, zero, param]),
            FamilyKind::ScaledPower { degree } => {
                if *degree == 0 {
                    return Err(Error::Config("degree must be at least 1".into()));
                }
                let mut p = vec![zero; degree + 1];
                p[0] = param;
                RationalMap::polynomial(&p)
            }
            FamilyKind::Linear => RationalMap::polynomial(&[param, zero]),
            FamilyKind::Conjugated { inner, matrix } => {
                let c = |k: usize| C::new(matrix[k][0], matrix[k][1]);
                let m = Isometry::from_matrix(c(0), c(1), c(2), c(3))?;
                Ok(inner.instantiate(param)?.conjugate(&m))
            }
        }
    }
}

impl FamilySpec {
    pub fn params(&self) -> Vec<C> {
        self.parameters.iter().map(|p| C::new(p[0], p[1])).collect()
    }

    pub fn members(&self) -> Result<Vec<(C, RationalMap)>> {
        self.params()
            .into_iter()
            .map(|c| Ok((c, self.kind.instantiate(c)?)))
            .collect()
    }
}

/// Where to start the preimage search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpec {
    /// Depths of seeds on the rays toward f⁻¹(0) ∪ f⁻¹(∞).
    pub depths: Vec<f64>,
    pub random_seeds: usize,
    /// Random seeds are stratified in hyperbolic radius on [0, random_radius].
    pub random_radius: f64,
    pub dedupe_radius: f64,
    pub seed: u64,
    /// Balance-vector tolerance for accepting a preimage.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            depths: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            random_seeds: 16,
            random_radius: 10.0,
            dedupe_radius: 1e-4,
            seed: 0,
            tolerance: 1e-10,
            max_iterations: 100,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PreimageSolution {
    #[serde(skip)]
    pub frame: Isometry,
    pub point: [f64; 3],
    pub depth: f64,
    pub residual: f64,
}

/// Solutions of E f(y) = 0 found from the seed recipe; a lower bound for
/// the full preimage set.
#[derive(Clone, Debug, Serialize)]
pub struct PreimageSet {
    pub solutions: Vec<PreimageSolution>,
    pub seed_count: usize,
    pub dedupe_radius: f64,
}

/// Seeds: the origin, rays toward zeros and poles at the configured
/// depths, and stratified random points.
fn seed_frames(f: &RationalMap, search: &SearchSpec) -> Result<Vec<Isometry>> {
    let mut frames = vec![Isometry::identity()];
    let mut targets: Vec<PlanePoint> = Vec::new();
    for form in [f.p(), f.q()] {
        for h in form.roots()? {
            let p = h.to_plane();
            if !targets.iter().any(|t| t.chordal(&p) < 1e-9) {
                targets.push(p);
            }
        }
    }
    for t in &targets {
        let dir = stereo_project(*t);
        for &depth in &search.depths {
            frames.push(mx_translation(&BallPoint::at_distance(&dir, depth)?));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    for i in 0..search.random_seeds {
        let radius = search.random_radius * (i as f64 + rng.gen::<f64>()) / search.random_seeds.max(1) as f64;
        let v = loop {
            let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if v.norm() > 1e-3 && v.norm() <= 1.0 {
                break v / v.norm();
            }
        };
        frames.push(mx_translation(&BallPoint::at_distance(&SpherePoint::new(v)?, radius)?));
    }
    Ok(frames)
}

/// Σ w f(Y ζ_i) and the domain Jacobian 4 Σ w f(Y ζ_i) ζ_iᵀ.
fn image_balance(f: &RationalMap, y: &Isometry, rule: &QuadratureRule) -> Result<(Vec3, Matrix3<f64>)> {
    let mut b = Vec3::zeros();
    let mut j = Matrix3::zeros();
    for (z, w) in rule.iter() {
        let p = f.eval_sphere(&y.apply_sphere(z))?.vector();
        b += w * p;
        j += 4.0 * w * p * z.vector().transpose();
    }
    Ok((b, j))
}

const MAX_STEP: f64 = 0.462_117_157_260_009_76; // tanh(1/2)

/// Levenberg–Marquardt on y ↦ Σ w f(M_y ζ_i) in the moving domain frame.
fn solve_preimage(
    f: &RationalMap,
    seed: &Isometry,
    rule: &QuadratureRule,
    search: &SearchSpec,
) -> Result<(Isometry, f64)> {
    let mut y = *seed;
    let (mut b, mut j) = image_balance(f, &y, rule)?;
    let mut lambda = 1e-3;
    for _ in 0..search.max_iterations {
        let res = b.norm();
        if res < search.tolerance {
            return Ok((y, res));
        }
        let jtj = j.transpose() * j;
        let g = j.transpose() * b;
        let mut accepted = false;
        for _ in 0..40 {
            let a = jtj + Matrix3::identity() * (lambda * jtj.diagonal().max().max(1e-12));
            let Some(inv) = a.try_inverse() else {
                lambda *= 4.0;
                continue;
            };
            let mut s = -inv * g;
            if s.norm() > MAX_STEP {
                s *= MAX_STEP / s.norm();
            }
            let trial = y * mx_translation(&BallPoint::new(s)?);
            if let Ok((tb, tj)) = image_balance(f, &trial, rule) {
                if tb.norm() < res {
                    y = trial;
                    b = tb;
                    j = tj;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !accepted {
            return Err(Error::numeric("preimage search stalled", res));
        }
    }
    Err(Error::numeric("preimage search did not converge", b.norm()))
}

/// Newton on y ↦ E f(Y(0)) with the refined solver, from a solution of the
/// product-rule balance. Returns the frame and |E f(y)|.
fn polish(f: &RationalMap, seed: Isometry, rule: &QuadratureRule, search: &SearchSpec) -> Result<(Isometry, f64)> {
    let opts = SolverOptions {
        tolerance: search.tolerance.min(SolverOptions::default().tolerance),
        ..Default::default()
    };
    let mut y = seed;
    let mut res = f64::INFINITY;
    for _ in 0..search.max_iterations.min(12) {
        let d = derivative_by(f, &y, rule, &opts)?;
        let image = d.image_frame.origin_image()?;
        res = image.norm();
        if res < search.tolerance {
            return Ok((y, res));
        }
        // The origin in the image chart, pulled back through the derivative.
        let target = d.image_frame.inverse().origin_image()?.vector();
        let inv = d
            .matrix
            .try_inverse()
            .ok_or_else(|| Error::numeric("singular derivative at a preimage", res))?;
        let mut s = inv * target;
        if s.norm() > MAX_STEP {
            s *= MAX_STEP / s.norm();
        }
        y = y * mx_translation(&BallPoint::new(s)?);
    }
    Err(Error::numeric("preimage polish did not converge", res))
}

fn coord_cmp(a: &[f64; 3], b: &[f64; 3]) -> Ordering {
    a[0].total_cmp(&b[0])
        .then(a[1].total_cmp(&b[1]))
        .then(a[2].total_cmp(&b[2]))
}

/// Solves E f(y) = 0 from every seed, merging solutions closer than the
/// dedupe radius. Fails only when no seed converges.
pub fn preimages_of_origin(f: &RationalMap, rule: &QuadratureRule, search: &SearchSpec) -> Result<PreimageSet> {
    let seeds = seed_frames(f, search)?;
    let found: Vec<Option<(Isometry, f64)>> = seeds
        .par_iter()
        .map(|s| {
            solve_preimage(f, s, rule, search)
                .and_then(|(y, _)| polish(f, y, rule, search))
                .ok()
        })
        .collect();
    let mut solutions: Vec<PreimageSolution> = Vec::new();
    let mut points: Vec<BallPoint> = Vec::new();
    for (frame, residual) in found.into_iter().flatten() {
        let Ok(p) = frame.origin_image() else { continue };
        if points.iter().any(|q| hyp_dist(q, &p) <= search.dedupe_radius) {
            continue;
        }
        points.push(p);
        let v = p.vector();
        solutions.push(PreimageSolution {
            frame,
            point: [v.x, v.y, v.z],
            depth: p.depth(),
            residual,
        });
    }
    if solutions.is_empty() {
        return Err(Error::SearchFailure(format!(
            "no preimage of the origin found from {} seeds",
            seeds.len()
        )));
    }
    solutions.sort_by(|a, b| coord_cmp(&a.point, &b.point));
    Ok(PreimageSet {
        solutions,
        seed_count: seeds.len(),
        dedupe_radius: search.dedupe_radius,
    })
}

/// max distance from the origin over the found preimages.
pub fn rescale_radius(set: &PreimageSet) -> f64 {
    set.solutions.iter().map(|s| s.depth).fold(0.0, f64::max)
}

#[derive(Clone, Debug, Serialize)]
pub struct IndicatorRow {
    pub parameter: [f64; 2],
    pub radius: Option<f64>,
    pub resultant: f64,
    pub solutions: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Indicator {
    pub rows: Vec<IndicatorRow>,
    pub radius_increasing: bool,
    pub resultant_decreasing: bool,
}

fn strictly_monotone(values: &[Option<f64>], increasing: bool) -> bool {
    values.windows(2).all(|w| match (w[0], w[1]) {
        (Some(a), Some(b)) => {
            if increasing {
                b > a
            } else {
                b < a
            }
        }
        _ => false,
    })
}

/// Rescaling radius and resultant along a family. Per-parameter failures
/// are recorded in the row.
pub fn degeneration_indicator(
    family: &FamilySpec,
    rule: &QuadratureRule,
    search: &SearchSpec,
) -> Result<Indicator> {
    let mut rows = Vec::new();
    for (c, f) in family.members()? {
        let (radius, solutions, error) = match preimages_of_origin(&f, rule, search) {
            Ok(set) => (Some(rescale_radius(&set)), set.solutions.len(), None),
            Err(e) => (None, 0, Some(e.to_string())),
        };
        rows.push(IndicatorRow {
            parameter: [c.re, c.im],
            radius,
            resultant: f.resultant_magnitude(),
            solutions,
            error,
        });
    }
    let radii: Vec<Option<f64>> = rows.iter().map(|r| r.radius).collect();
    let res: Vec<Option<f64>> = rows.iter().map(|r| Some(r.resultant)).collect();
    Ok(Indicator {
        radius_increasing: strictly_monotone(&radii, true),
        resultant_decreasing: strictly_monotone(&res, false),
        rows,
    })
}

/// The cycle used for translation estimates: repelling cycles first, then
/// largest |multiplier|, ties broken by the first point's coordinates.
pub fn select_cycle(cycles: &[PeriodicCycle]) -> Option<&PeriodicCycle> {
    let key = |c: &PeriodicCycle| -> (f64, f64, f64) {
        match c.points[0] {
            PlanePoint::Finite(z) => (c.multiplier.norm(), z.re, z.im),
            PlanePoint::Infinity => (c.multiplier.norm(), f64::INFINITY, f64::INFINITY),
        }
    };
    cycles.iter().max_by(|a, b| {
        let (ma, ra, ia) = key(a);
        let (mb, rb, ib) = key(b);
        let close = (ma - mb).abs() <= 1e-9 * ma.max(mb);
        if close {
            // Smaller coordinates win, so compare reversed.
            rb.total_cmp(&ra).then(ib.total_cmp(&ia))
        } else {
            ma.total_cmp(&mb)
        }
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TranslationRecord {
    pub parameter: [f64; 2],
    pub radius: f64,
    pub cycle_point: PlanePoint,
    pub cycle_length: f64,
    pub multiplier_ratio: f64,
    /// (t, [dist(x, 0) − dist(E f^q(x), 0)] / r) for x at depth t·r.
    pub displacements: Vec<(f64, f64)>,
    /// The displacement ratio at the deepest grid point.
    pub displacement_ratio: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TranslationEstimate {
    pub records: Vec<TranslationRecord>,
    pub gaps_decreasing: bool,
}

pub const DEFAULT_DEPTH_GRID: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

/// Cycle lengths against displacements along the ray to a cycle point.
pub fn translation_estimate(
    family: &FamilySpec,
    q: usize,
    rule: &QuadratureRule,
    depth_grid: &[f64],
    search: &SearchSpec,
    opts: &SolverOptions,
) -> Result<TranslationEstimate> {
    if depth_grid.is_empty() || depth_grid.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(Error::Config("depth grid must be a nonempty subset of (0, 1]".into()));
    }
    let deepest = depth_grid.iter().cloned().fold(0.0, f64::max);
    let mut records = Vec::new();
    for (c, f) in family.members()? {
        let cycles = f.find_cycles(q)?;
        let cycle = select_cycle(&cycles)
            .ok_or_else(|| Error::SearchFailure(format!("no cycle of period {q}")))?
            .clone();
        let length = f.cycle_length(&cycle)?;
        let radius = rescale_radius(&preimages_of_origin(&f, rule, search)?);
        let fq = f.iterate(q)?;
        let dir = stereo_project(cycle.points[0]);
        let mut displacements = Vec::new();
        for &t in depth_grid {
            let depth = t * radius;
            let x = mx_translation(&BallPoint::at_distance(&dir, depth)?);
            let image = extend_by(&fq, &x, rule, opts)?;
            displacements.push((t, (depth - image.point.depth()) / radius));
        }
        let displacement_ratio = displacements
            .iter()
            .find(|(t, _)| *t == deepest)
            .map(|(_, v)| *v)
            .unwrap_or(f64::NAN);
        let multiplier_ratio = length / radius;
        records.push(TranslationRecord {
            parameter: [c.re, c.im],
            radius,
            cycle_point: cycle.points[0],
            cycle_length: length,
            multiplier_ratio,
            displacements,
            displacement_ratio,
            gap: (multiplier_ratio - displacement_ratio).abs(),
        });
    }
    let gaps_decreasing = records.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok(TranslationEstimate {
        records,
        gaps_decreasing,
    })
}

/// dist(E(f^N)(x), (E f)^N(x)). The chain (E f)^N(x) is carried as a
/// frame H; by naturality the distance equals that of E(H⁻¹ ∘ f^N)(x)
/// from the origin, which stays shallow even when both points are too
/// deep for ball coordinates.
pub fn naturality_gap(
    f: &RationalMap,
    n: usize,
    x: &BallPoint,
    rule: &QuadratureRule,
    opts: &SolverOptions,
) -> Result<f64> {
    let fx = mx_translation(x);
    let fnth = f.iterate(n)?;
    let mut frame = fx;
    for _ in 0..n {
        frame = extend_frame_by(f, &frame, rule, opts)?.0;
    }
    let back = frame.inverse();
    let points = rule
        .nodes()
        .iter()
        .map(|z| {
            let w = fnth.eval_homogeneous(&fx.apply_homogeneous(&Homogeneous::from_sphere(z)))?;
            Ok(back.apply_homogeneous(&w).to_sphere())
        })
        .collect::<Result<Vec<_>>>()?;
    let m = WeightedSpherePoints::new(points, rule.weights().to_vec(), "naturality gap")?;
    Ok(barycenter(&m, opts)?.point.depth())
}

/// A point to be placed in a rescaled snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marked {
    /// A boundary point, placed on its ray at rescaled depth one.
    Plane(PlanePoint),
    /// An interior point; its image under E f is added too.
    Ball([f64; 3]),
}

#[derive(Clone, Debug, Serialize)]
pub struct SnapshotEntry {
    pub label: String,
    /// Direction times (distance from the origin / scale).
    pub coords: [f64; 3],
}

fn rescaled(p: &BallPoint, scale: f64) -> [f64; 3] {
    let v = p.vector();
    let n = v.norm();
    if n == 0.0 {
        return [0.0; 3];
    }
    let k = p.depth() / scale / n;
    [v.x * k, v.y * k, v.z * k]
}

/// Rescaled positions of the basepoint, marked points, their images
/// under E f, and the given preimages.
pub fn snapshot(
    f: &RationalMap,
    scale: f64,
    marked: &[Marked],
    preimages: Option<&PreimageSet>,
    rule: &QuadratureRule,
    opts: &SolverOptions,
) -> Result<Vec<SnapshotEntry>> {
    if !(scale > 0.0) {
        return Err(Error::Domain("snapshot scale must be positive".into()));
    }
    let mut out = vec![SnapshotEntry {
        label: "basepoint".into(),
        coords: [0.0; 3],
    }];
    for (i, m) in marked.iter().enumerate() {
        match m {
            Marked::Plane(z) => {
                let v = stereo_project(*z).vector();
                out.push(SnapshotEntry {
                    label: format!("end{i}"),
                    coords: [v.x, v.y, v.z],
                });
            }
            Marked::Ball(p) => {
                let b = BallPoint::from_coords(p[0], p[1], p[2])?;
                out.push(SnapshotEntry {
                    label: format!("point{i}"),
                    coords: rescaled(&b, scale),
                });
                let img = extend_by(f, &mx_translation(&b), rule, opts)?;
                out.push(SnapshotEntry {
                    label: format!("image{i}"),
                    coords: rescaled(&img.point, scale),
                });
            }
        }
    }
    if let Some(set) = preimages {
        for (i, s) in set.solutions.iter().enumerate() {
            let b = BallPoint::from_coords(s.point[0], s.point[1], s.point[2])?;
            out.push(SnapshotEntry {
                label: format!("preimage{i}"),
                coords: rescaled(&b, scale),
            });
        }
    }
    Ok(out)
}

/// Rescaled hyperbolic distances between snapshot entries, reconstructing
/// each ball point from its direction and rescaled depth.
pub fn snapshot_distances(entries: &[SnapshotEntry], scale: f64) -> Result<Vec<Vec<f64>>> {
    let pts = entries
        .iter()
        .map(|e| {
            let v = Vec3::new(e.coords[0], e.coords[1], e.coords[2]);
            let n = v.norm();
            if n == 0.0 {
                Ok(BallPoint::origin())
            } else {
                BallPoint::at_distance(&SpherePoint::new(v / n)?, n * scale)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pts
        .iter()
        .map(|a| pts.iter().map(|b| hyp_dist(a, b) / scale).collect())
        .collect())
}
