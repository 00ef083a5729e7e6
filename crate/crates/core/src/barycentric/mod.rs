//! The conformal barycenter of a discrete measure on S² and the
//! barycentric extension E f of a rational map.
//!
//! All solves happen in a normalized frame: an isometry G is carried along
//! and the measure is pulled back by G⁻¹ before every step, so the current
//! iterate always sits at the origin. The extension value is G(0), and G
//! itself is returned so that deep points keep full precision in later
//! computations.

mod radial;
mod belt;
mod refine;
mod scan;

pub use radial::{delta_curve, kappa, lemma_a2_check, lemma_a2_g, DeltaCurve, LemmaA2};
pub use belt::{belt_bound, belt_volume, belt_volume_unchecked, BeltVolume, BELT_INNER, BELT_OUTER};
pub use scan::{lipschitz_scan, HistogramBin, LipschitzReport, LipschitzSample, ScanOptions};

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::h3::{hyp_dist, mx_closed_form, mx_translation, BallPoint, Isometry};
use crate::rational::RationalMap;
use crate::sphere::{stereo_unproject, QuadratureRule, SpherePoint, Vec3};

/// Solver settings shared by every barycenter computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Stop when the balance vector in the normalized frame is shorter.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Jacobian condition number above which the measure is reported as
    /// too concentrated.
    pub max_condition: f64,
    /// Error budget for the adaptive re-solve after the product-rule
    /// solve; zero keeps the product rule alone.
    pub quadrature_tolerance: f64,
    /// Node budget of the adaptive rule.
    pub max_nodes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200,
            max_condition: 1e8,
            quadrature_tolerance: 1e-9,
            max_nodes: 200_000,
        }
    }
}

impl SolverOptions {
    /// The same settings with the adaptive re-solve switched off.
    pub fn fixed_rule(&self) -> Self {
        Self {
            quadrature_tolerance: 0.0,
            ..*self
        }
    }
}

/// A finitely supported probability measure on S².
#[derive(Clone, Debug)]
pub struct WeightedSpherePoints {
    points: Vec<SpherePoint>,
    weights: Vec<f64>,
    note: String,
}

impl WeightedSpherePoints {
    pub fn new(points: Vec<SpherePoint>, weights: Vec<f64>, note: impl Into<String>) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::Config("points and weights must be nonempty and of equal length".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Config("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("weights sum to {total}, not 1")));
        }
        Ok(Self {
            points,
            weights,
            note: note.into(),
        })
    }

    pub fn points(&self) -> &[SpherePoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Where the measure came from (map, frame, rule).
    pub fn note(&self) -> &str {
        &self.note
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(0.0, f64::max)
    }

    /// The same measure pulled back by G: points G⁻¹(ζ_i).
    pub fn pulled_back(&self, g: &Isometry) -> WeightedSpherePoints {
        let inv = g.inverse();
        WeightedSpherePoints {
            points: self.points.iter().map(|p| inv.apply_sphere(p)).collect(),
            weights: self.weights.clone(),
            note: self.note.clone(),
        }
    }

    fn mean(&self) -> Vec3 {
        self.points
            .iter()
            .zip(&self.weights)
            .fold(Vec3::zeros(), |acc, (p, w)| acc + *w * p.vector())
    }
}

/// E f(x) together with the frame G that realizes it (G(0) = point).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtensionResult {
    pub point: BallPoint,
    pub residual: f64,
    pub iterations: usize,
    pub frame: Isometry,
}

/// D E f(x) in normalized frames: `domain_frame` carries 0 to x and
/// `image_frame` carries 0 to E f(x).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeMatrix {
    pub matrix: Matrix3<f64>,
    pub domain_frame: Isometry,
    pub image_frame: Isometry,
}

/// The measure (f ∘ M_x)_* of the rule.
pub fn pushforward(f: &RationalMap, x: &BallPoint, rule: &QuadratureRule) -> Result<WeightedSpherePoints> {
    pushforward_by(f, &mx_translation(x), rule)
}

/// The measure (f ∘ X)_* of the rule for an arbitrary isometry X.
pub fn pushforward_by(f: &RationalMap, x: &Isometry, rule: &QuadratureRule) -> Result<WeightedSpherePoints> {
    let points = rule
        .nodes()
        .iter()
        .map(|z| f.eval_sphere(&x.apply_sphere(z)))
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightedSpherePoints {
        points,
        weights: rule.weights().to_vec(),
        note: format!("degree-{} map, {} nodes (order {})", f.degree(), rule.len(), rule.order()),
    })
}

/// Σ w_i M_{−y}(ζ_i).
pub fn balance_vector(m: &WeightedSpherePoints, y: &BallPoint) -> Vec3 {
    let ny = -y.vector();
    m.points
        .iter()
        .zip(&m.weights)
        .fold(Vec3::zeros(), |acc, (p, w)| acc + *w * mx_closed_form(&ny, &p.vector()))
}

/// Balance vector b and Jacobian J = −2I + 2 Σ w p pᵀ of the normalized
/// points.
fn moments(points: &[Vec3], weights: &[f64]) -> (Vec3, Matrix3<f64>) {
    let mut b = Vec3::zeros();
    let mut t = Matrix3::zeros();
    for (p, w) in points.iter().zip(weights) {
        b += *w * p;
        t += *w * p * p.transpose();
    }
    (b, -2.0 * Matrix3::identity() + 2.0 * t)
}

fn normalized_points(m: &WeightedSpherePoints, g: &Isometry) -> Vec<Vec3> {
    let inv = g.inverse();
    m.points.iter().map(|p| inv.apply_sphere(p).vector()).collect()
}

/// Change of Σ w log(‖s − p‖² / (1 − ‖s‖²)), the convex potential whose
/// gradient at 0 is −2b, when the center moves from 0 to s.
fn potential_change(points: &[Vec3], weights: &[f64], s: &Vec3) -> f64 {
    let lift = (1.0 - s.norm_squared()).ln();
    points
        .iter()
        .zip(weights)
        .map(|(p, w)| w * ((s - p).norm_squared().ln() - lift))
        .sum()
}

fn condition_number(j: &Matrix3<f64>) -> f64 {
    let eig = SymmetricEigen::new(*j).eigenvalues;
    let (lo, hi) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(e.abs()), hi.max(e.abs())));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Largest Euclidean step in the normalized frame, hyperbolic length 1.
const MAX_STEP: f64 = 0.462_117_157_260_009_76; // tanh(1/2)

fn newton_step(b: &Vec3, j: &Matrix3<f64>) -> Vec3 {
    let eig = SymmetricEigen::new(*j);
    let mut s = Vec3::zeros();
    for k in 0..3 {
        let u = eig.eigenvectors.column(k);
        let lam = eig.eigenvalues[k].min(-1e-12);
        s -= u * (u.dot(b) / lam);
    }
    s
}

/// The lower bound 8 log 3 / (27 d) on the smallest |eigenvalue| of F_y
/// for a recentered degree-d map.
pub fn spectral_bound(degree: usize) -> f64 {
    8.0 * 3f64.ln() / (27.0 * degree as f64)
}

/// Damped Newton iteration for the barycenter, started from the frame
/// `seed`.
pub fn barycenter_from(
    m: &WeightedSpherePoints,
    seed: &Isometry,
    opts: &SolverOptions,
) -> Result<ExtensionResult> {
    let (frame, residual, iterations) = barycenter_frame(m, seed, opts)?;
    let point = frame
        .origin_image()
        .map_err(|_| Error::numeric("barycenter lies beyond representable depth", residual))?;
    Ok(ExtensionResult {
        point,
        residual,
        iterations,
        frame,
    })
}

/// The solver behind [`barycenter_from`], returning only the frame, its
/// residual and the iteration count. Works at any depth the frame can
/// represent.
pub fn barycenter_frame(
    m: &WeightedSpherePoints,
    seed: &Isometry,
    opts: &SolverOptions,
) -> Result<(Isometry, f64, usize)> {
    if m.max_weight() >= 0.25 {
        return Err(Error::Precondition(format!(
            "largest atom {} is not below 1/4",
            m.max_weight()
        )));
    }
    let mut g = *seed;
    let mut pts = normalized_points(m, &g);
    let (mut b, mut j) = moments(&pts, &m.weights);
    for it in 0..=opts.max_iterations {
        let res = b.norm();
        if !res.is_finite() {
            return Err(Error::numeric("balance vector is not finite", res));
        }
        if res < opts.tolerance {
            let cond = condition_number(&j);
            if cond > opts.max_condition {
                return Err(Error::Concentration { condition: cond });
            }
            return Ok((g, res, it));
        }
        if it == opts.max_iterations {
            break;
        }

        let mut s = newton_step(&b, &j);
        let clipped = s.norm() > MAX_STEP;
        if clipped {
            s *= MAX_STEP / s.norm();
        }
        // Directional derivative of the potential along s.
        let mut slope = -2.0 * b.dot(&s);
        if !(slope < 0.0) {
            s = b * (MAX_STEP.min(b.norm()) / b.norm());
            slope = -2.0 * b.dot(&s);
        }

        let mut accepted = None;
        if !clipped && s.norm() < 0.05 {
            // Quadratic regime: the potential is flat to rounding, so
            // judge the full step by the residual instead.
            let trial_g = g * mx_translation(&BallPoint::new(s)?);
            let trial_pts = normalized_points(m, &trial_g);
            let (tb, tj) = moments(&trial_pts, &m.weights);
            if tb.norm() < res {
                accepted = Some((trial_g, trial_pts, tb, tj));
            }
        }
        if accepted.is_none() {
            let mut alpha = 1.0;
            for _ in 0..50 {
                let trial = s * alpha;
                if potential_change(&pts, &m.weights, &trial) <= 1e-4 * alpha * slope {
                    let trial_g = g * mx_translation(&BallPoint::new(trial)?);
                    let trial_pts = normalized_points(m, &trial_g);
                    let (tb, tj) = moments(&trial_pts, &m.weights);
                    accepted = Some((trial_g, trial_pts, tb, tj));
                    break;
                }
                alpha *= 0.5;
            }
        }
        match accepted {
            Some((ng, np, nb, nj)) => {
                g = ng;
                pts = np;
                b = nb;
                j = nj;
            }
            None => {
                return Err(Error::numeric("line search stalled", res));
            }
        }
    }
    Err(Error::numeric(
        format!("no convergence in {} iterations", opts.max_iterations),
        b.norm(),
    ))
}

/// The barycenter, from the origin and then from the rescaled centroid.
pub fn barycenter(m: &WeightedSpherePoints, opts: &SolverOptions) -> Result<ExtensionResult> {
    match barycenter_from(m, &Isometry::identity(), opts) {
        Err(Error::Numeric { .. }) => barycenter_from(m, &centroid_seed(m)?, opts),
        other => other,
    }
}

fn centroid_seed(m: &WeightedSpherePoints) -> Result<Isometry> {
    let c = m.mean();
    let n = c.norm();
    let c = if n >= 0.999 { c * (0.999 / n) } else { c };
    Ok(mx_translation(&BallPoint::new(c)?))
}

/// A starting frame for E f at X(0): the point over f(p) whose depth is
/// that of X(0) corrected by the local spherical derivative, where p is
/// the boundary point X(0) points at.
fn heuristic_seed(f: &RationalMap, x: &Isometry) -> Option<Isometry> {
    let xp = x.origin_image().ok()?;
    let depth = xp.depth();
    if depth < 2.0 {
        return None;
    }
    let dir = SpherePoint::new(xp.vector()).ok()?;
    let z = stereo_unproject(&dir);
    let fp = f.eval_sphere(&dir).ok()?;
    let sd = f.spherical_derivative(z);
    let target = if sd > 0.0 { depth - sd.ln() } else { 2.0 * depth };
    let target = target.clamp(0.0, 30.0);
    let y = BallPoint::at_distance(&fp, target).ok()?;
    Some(mx_translation(&y))
}

/// E f(x) = barycenter of (f ∘ M_x)_* μ.
pub fn extend(
    f: &RationalMap,
    x: &BallPoint,
    rule: &QuadratureRule,
    opts: &SolverOptions,
) -> Result<ExtensionResult> {
    extend_by(f, &mx_translation(x), rule, opts)
}

/// A finished solve: the frame, and the source nodes and pushforward it
/// was balanced on.
struct Solved {
    frame: Isometry,
    residual: f64,
    iterations: usize,
    nodes: Vec<SpherePoint>,
    measure: WeightedSpherePoints,
}

/// Product-rule solve from the seed list, then (unless switched off) the
/// re-solve on an adaptive rule built around the current frame. The rule
/// is rebuilt once if the re-solve moves the point by more than 1e−3.
fn solve(f: &RationalMap, x: &Isometry, rule: &QuadratureRule, opts: &SolverOptions) -> Result<Solved> {
    let m = pushforward_by(f, x, rule)?;
    let mut last_err = None;
    let mut found = None;
    let seeds = heuristic_seed(f, x)
        .into_iter()
        .chain([Isometry::identity()])
        .chain(centroid_seed(&m).ok());
    for seed in seeds {
        match barycenter_frame(&m, &seed, opts) {
            Ok(r) => {
                found = Some(r);
                break;
            }
            Err(e @ Error::Numeric { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    let (frame, residual, iterations) = match found {
        Some(r) => r,
        None => return Err(last_err.expect("at least one seed is tried")),
    };
    let mut out = Solved {
        frame,
        residual,
        iterations,
        nodes: rule.nodes().to_vec(),
        measure: m,
    };
    if opts.quadrature_tolerance <= 0.0 {
        return Ok(out);
    }
    let per_face = (rule.order() + 1).div_ceil(12);
    for _ in 0..2 {
        let (nodes, images, weights) =
            refine::refined_nodes(f, x, &out.frame, per_face, opts.quadrature_tolerance, opts.max_nodes)?;
        let measure = WeightedSpherePoints::new(
            images,
            weights,
            format!("degree-{} map, {} adaptive nodes", f.degree(), nodes.len()),
        )?;
        let (frame, residual, iterations) = barycenter_frame(&measure, &out.frame, opts)?;
        let shift = (out.frame.inverse() * frame).origin_image().map(|p| p.depth()).unwrap_or(f64::INFINITY);
        out = Solved {
            frame,
            residual,
            iterations: out.iterations + iterations,
            nodes,
            measure,
        };
        if shift < 1e-3 {
            break;
        }
    }
    Ok(out)
}

/// The frame G with G(0) = E f(X(0)) and the final residual, without
/// forming the ball point.
pub fn extend_frame_by(
    f: &RationalMap,
    x: &Isometry,
    rule: &QuadratureRule,
    opts: &SolverOptions,
) -> Result<(Isometry, f64)> {
    let s = solve(f, x, rule, opts)?;
    Ok((s.frame, s.residual))
}

/// E f(X(0)) computed from the pushforward by X; differs from [`extend`]
/// only by the rotation of the rule about the origin.
pub fn extend_by(
    f: &RationalMap,
    x: &Isometry,
    rule: &QuadratureRule,
    opts: &SolverOptions,
) -> Result<ExtensionResult> {
    let s = solve(f, x, rule, opts)?;
    let point = s
        .frame
        .origin_image()
        .map_err(|_| Error::numeric("barycenter lies beyond representable depth", s.residual))?;
    Ok(ExtensionResult {
        point,
        residual: s.residual,
        iterations: s.iterations,
        frame: s.frame,
    })
}

/// |mean| allowed by [`fy_operator`] and [`fx_operator`].
pub const BALANCE_TOLERANCE: f64 = 1e-8;

fn check_balanced(m: &WeightedSpherePoints, tol: f64) -> Result<()> {
    let b = m.mean().norm();
    if b > tol {
        return Err(Error::Precondition(format!(
            "measure is not balanced at the origin (|b| = {b:e})"
        )));
    }
    Ok(())
}

/// F_y at a measure balanced at the origin: −2I + 2 Σ w ζ ζᵀ.
pub fn fy_operator(m: &WeightedSpherePoints) -> Result<Matrix3<f64>> {
    check_balanced(m, BALANCE_TOLERANCE)?;
    let pts: Vec<Vec3> = m.points.iter().map(|p| p.vector()).collect();
    Ok(moments(&pts, &m.weights).1)
}

/// F_x at a balanced normalized pushforward: 4 Σ w g(ζ) ζᵀ, where
/// `nodes[i]` is the source of `m.points()[i]`.
pub fn fx_operator(m: &WeightedSpherePoints, nodes: &[SpherePoint]) -> Result<Matrix3<f64>> {
    if nodes.len() != m.len() {
        return Err(Error::Precondition("node count does not match the measure".into()));
    }
    check_balanced(m, BALANCE_TOLERANCE)?;
    Ok(fx_unchecked(m, nodes))
}

fn fx_unchecked(m: &WeightedSpherePoints, nodes: &[SpherePoint]) -> Matrix3<f64> {
    let mut fx = Matrix3::zeros();
    for ((p, w), z) in m.points.iter().zip(&m.weights).zip(nodes) {
        fx += 4.0 * *w * p.vector() * z.vector().transpose();
    }
    fx
}

/// F_y, F_x and the extension at X(0), all in normalized frames.
pub fn operators_by(
    f: &RationalMap,
    x: &Isometry,
    rule: &QuadratureRule,
    opts: &SolverOptions,
) -> Result<(Matrix3<f64>, Matrix3<f64>, ExtensionResult)> {
    let s = solve(f, x, rule, opts)?;
    let normalized = s.measure.pulled_back(&s.frame);
    // A solve accepted at a looser tolerance is balanced only to that.
    check_balanced(&normalized, BALANCE_TOLERANCE.max(10.0 * opts.tolerance))?;
    let fy = moments(&normalized.points.iter().map(|p| p.vector()).collect::<Vec<_>>(), &normalized.weights).1;
    let fx = fx_unchecked(&normalized, &s.nodes);
    let point = s
        .frame
        .origin_image()
        .map_err(|_| Error::numeric("barycenter lies beyond representable depth", s.residual))?;
    let ext = ExtensionResult {
        point,
        residual: s.residual,
        iterations: s.iterations,
        frame: s.frame,
    };
    Ok((fy, fx, ext))
}

/// D E f(x) = −F_y⁻¹ F_x.
pub fn derivative(
    f: &RationalMap,
    x: &BallPoint,
    rule: &QuadratureRule,
    opts: &SolverOptions,
) -> Result<DerivativeMatrix> {
    derivative_by(f, &mx_translation(x), rule, opts)
}

pub fn derivative_by(
    f: &RationalMap,
    x: &Isometry,
    rule: &QuadratureRule,
    opts: &SolverOptions,
) -> Result<DerivativeMatrix> {
    let (fy, fx, ext) = operators_by(f, x, rule, opts)?;
    let inv = fy
        .try_inverse()
        .ok_or_else(|| Error::numeric("F_y is singular", 0.0))?;
    Ok(DerivativeMatrix {
        matrix: -inv * fx,
        domain_frame: *x,
        image_frame: ext.frame,
    })
}

/// Central finite differences of the extension in normalized frames, with
/// step `eps` along each coordinate axis.
pub fn derivative_fd(
    f: &RationalMap,
    x: &Isometry,
    rule: &QuadratureRule,
    opts: &SolverOptions,
    eps: f64,
) -> Result<Matrix3<f64>> {
    let base = extend_by(f, x, rule, opts)?;
    let back = base.frame.inverse();
    let mut d = Matrix3::zeros();
    for k in 0..3 {
        let mut v = Vec3::zeros();
        v[k] = eps;
        let plus = extend_by(f, &(*x * mx_translation(&BallPoint::new(v)?)), rule, opts)?;
        let minus = extend_by(f, &(*x * mx_translation(&BallPoint::new(-v)?)), rule, opts)?;
        let yp = back.apply_ball(&plus.point)?.vector();
        let ym = back.apply_ball(&minus.point)?.vector();
        d.set_column(k, &((yp - ym) / (2.0 * eps)));
    }
    Ok(d)
}

/// Operator norm for the hyperbolic metric. In normalized frames both
/// conformal factors equal the one at the origin and cancel, leaving the
/// spectral norm.
pub fn hyperbolic_operator_norm(d: &DerivativeMatrix) -> f64 {
    d.matrix.svd(false, false).singular_values.max()
}

/// Conjugates f on the image side so that E g(0) = 0: returns
/// g = G⁻¹ ∘ f and the frame G with G(0) = E f(0).
pub fn recenter(
    f: &RationalMap,
    rule: &QuadratureRule,
    opts: &SolverOptions,
) -> Result<(RationalMap, Isometry)> {
    let ext = extend(f, &BallPoint::origin(), rule, opts)?;
    Ok((f.post_compose(&ext.frame.inverse()), ext.frame))
}

/// Hyperbolic distance from E f(0) to the origin.
pub fn center_offset(f: &RationalMap, rule: &QuadratureRule, opts: &SolverOptions) -> Result<f64> {
    let ext = extend(f, &BallPoint::origin(), rule, opts)?;
    Ok(hyp_dist(&ext.point, &BallPoint::origin()))
}
