//! Adaptive cubature for the normalized pushforward.
//!
//! The sphere is cut into the six faces of a cube, each face into square
//! panels in gnomonic coordinates. A panel carries a 6 × 6 Gauss–Legendre
//! rule; the gap to a 4 × 4 rule on the same panel estimates its error.
//! The panel with the largest estimate is split in four until the summed
//! estimate drops below the tolerance or the node budget is spent.
//!
//! The integrand is the list of moments the solver and the derivative
//! need at a node ζ with normalized image k = G⁻¹ f(X ζ): 1, k, k kᵀ and
//! k ζᵀ.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::Result;
use crate::h3::Isometry;
use crate::rational::RationalMap;
use crate::sphere::{gauss_legendre, SpherePoint, Vec3};

const FINE: usize = 6;
const COARSE: usize = 4;
const COMPONENTS: usize = 19;

type Moments = [f64; COMPONENTS];

fn rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static FINE_RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static COARSE_RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match n {
        FINE => FINE_RULE.get_or_init(|| gauss_legendre(FINE)),
        _ => COARSE_RULE.get_or_init(|| gauss_legendre(COARSE)),
    }
}

/// Face normals and tangent frames; opposite faces are antipodal images of
/// each other so the panel set is symmetric.
const FACES: [([f64; 3], [f64; 3], [f64; 3]); 6] = [
    ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
    ([-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]),
    ([0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]),
    ([0.0, -1.0, 0.0], [0.0, 0.0, -1.0], [-1.0, 0.0, 0.0]),
    ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
    ([0.0, 0.0, -1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]),
];

#[derive(Clone, Copy, Debug)]
struct Panel {
    face: usize,
    u: (f64, f64),
    v: (f64, f64),
}

impl Panel {
    fn split(&self) -> [Panel; 4] {
        let um = 0.5 * (self.u.0 + self.u.1);
        let vm = 0.5 * (self.v.0 + self.v.1);
        let p = |u, v| Panel { face: self.face, u, v };
        [
            p((self.u.0, um), (self.v.0, vm)),
            p((um, self.u.1), (self.v.0, vm)),
            p((self.u.0, um), (vm, self.v.1)),
            p((um, self.u.1), (vm, self.v.1)),
        ]
    }

    /// Nodes and probability weights of the n × n rule on this panel.
    fn nodes(&self, n: usize) -> impl Iterator<Item = (Vec3, f64)> + '_ {
        let (x, w) = rule(n);
        let (n0, a, b) = FACES[self.face];
        let (n0, a, b) = (Vec3::from(n0), Vec3::from(a), Vec3::from(b));
        let hu = 0.5 * (self.u.1 - self.u.0);
        let hv = 0.5 * (self.v.1 - self.v.0);
        let cu = 0.5 * (self.u.1 + self.u.0);
        let cv = 0.5 * (self.v.1 + self.v.0);
        (0..n * n).map(move |k| {
            let (i, j) = (k / n, k % n);
            let u = cu + hu * x[i];
            let v = cv + hv * x[j];
            let p = n0 + a * u + b * v;
            let r2 = 1.0 + u * u + v * v;
            // Gnomonic area element over the sphere's total area 4π.
            let jac = hu * hv * w[i] * w[j] / (r2 * r2.sqrt() * 4.0 * std::f64::consts::PI);
            (p / r2.sqrt(), jac)
        })
    }
}

fn moments_at(z: &Vec3, k: &Vec3) -> Moments {
    let mut m = [0.0; COMPONENTS];
    m[0] = 1.0;
    m[1..4].copy_from_slice(k.as_slice());
    let mut idx = 4;
    for i in 0..3 {
        for j in i..3 {
            m[idx] = k[i] * k[j];
            idx += 1;
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            m[idx] = k[i] * z[j];
            idx += 1;
        }
    }
    m
}

struct Evaluated {
    panel: Panel,
    error: f64,
    /// Insertion order; breaks ties so the result is deterministic.
    id: usize,
    /// Fine-rule nodes with their images f(X ζ) and weights.
    nodes: Vec<(SpherePoint, SpherePoint, f64)>,
}

impl PartialEq for Evaluated {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Evaluated {}

impl PartialOrd for Evaluated {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Evaluated {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error).then(other.id.cmp(&self.id))
    }
}

fn evaluate(f: &RationalMap, x: &Isometry, g_inv: &Isometry, panel: Panel, id: usize) -> Result<Evaluated> {
    let image = |z: &Vec3| -> Result<(SpherePoint, SpherePoint, Vec3)> {
        let zeta = SpherePoint::new(*z)?;
        let fz = f.eval_sphere(&x.apply_sphere(&zeta))?;
        let k = g_inv.apply_sphere(&fz).vector();
        Ok((zeta, fz, k))
    };
    let mut fine = [0.0; COMPONENTS];
    let mut nodes = Vec::with_capacity(FINE * FINE);
    for (z, w) in panel.nodes(FINE) {
        let (zeta, fz, k) = image(&z)?;
        for (acc, m) in fine.iter_mut().zip(moments_at(&z, &k)) {
            *acc += w * m;
        }
        nodes.push((zeta, fz, w));
    }
    let mut coarse = [0.0; COMPONENTS];
    for (z, w) in panel.nodes(COARSE) {
        let (_, _, k) = image(&z)?;
        for (acc, m) in coarse.iter_mut().zip(moments_at(&z, &k)) {
            *acc += w * m;
        }
    }
    let error = fine.iter().zip(&coarse).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(Evaluated { panel, error, id, nodes })
}

/// Nodes, their images f(X ζ) and weights (summing to one) of an adaptive
/// rule for the integrand ζ ↦ G⁻¹ f(X ζ), starting from `per_face`²
/// panels per face.
pub(crate) fn refined_nodes(
    f: &RationalMap,
    x: &Isometry,
    g: &Isometry,
    per_face: usize,
    tolerance: f64,
    max_nodes: usize,
) -> Result<(Vec<SpherePoint>, Vec<SpherePoint>, Vec<f64>)> {
    let g_inv = g.inverse();
    let n = per_face.max(1);
    let step = 2.0 / n as f64;
    let mut heap = BinaryHeap::new();
    let mut next_id = 0;
    let mut total = 0.0;
    for face in 0..6 {
        for i in 0..n {
            for j in 0..n {
                let u = (-1.0 + step * i as f64, -1.0 + step * (i + 1) as f64);
                let v = (-1.0 + step * j as f64, -1.0 + step * (j + 1) as f64);
                let e = evaluate(f, x, &g_inv, Panel { face, u, v }, next_id)?;
                next_id += 1;
                total += e.error;
                heap.push(e);
            }
        }
    }
    let per_panel = FINE * FINE;
    while total > tolerance && (heap.len() + 3) * per_panel <= max_nodes {
        let worst = heap.pop().expect("panels remain");
        total -= worst.error;
        for child in worst.panel.split() {
            let e = evaluate(f, x, &g_inv, child, next_id)?;
            next_id += 1;
            total += e.error;
            heap.push(e);
        }
    }
    // Leaves in creation order, independent of heap layout.
    let mut leaves = heap.into_vec();
    leaves.sort_by_key(|e| e.id);
    let mut nodes = Vec::with_capacity(leaves.len() * per_panel);
    let mut images = Vec::with_capacity(leaves.len() * per_panel);
    let mut weights = Vec::with_capacity(leaves.len() * per_panel);
    for leaf in leaves {
        for (z, fz, w) in leaf.nodes {
            nodes.push(z);
            images.push(fz);
            weights.push(w);
        }
    }
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    Ok((nodes, images, weights))
}
