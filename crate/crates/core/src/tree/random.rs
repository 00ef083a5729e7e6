//! Random branched covers built by gluing sheets over a random tree, and
//! single-defect mutations of them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FiniteTree, TreeMap, TreePoint};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverOptions {
    pub min_vertices: usize,
    pub max_vertices: usize,
    pub max_sheets: usize,
    /// Probability that a sheet maps with slope 2.
    pub slope_two: f64,
    /// Probability that a leaf of the target is a marked end.
    pub end_probability: f64,
}

impl Default for CoverOptions {
    fn default() -> Self {
        Self {
            min_vertices: 3,
            max_vertices: 7,
            max_sheets: 4,
            slope_two: 0.3,
            end_probability: 0.4,
        }
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = x;
    while parent[c] != r {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

/// Copies of a random target tree, one per sheet, each scaled down by its
/// slope and glued to an earlier sheet at a copy of a non-end vertex.
pub fn random_cover<R: Rng + ?Sized>(rng: &mut R, opts: &CoverOptions) -> Result<TreeMap> {
    let n = rng.gen_range(opts.min_vertices.max(2)..=opts.max_vertices.max(opts.min_vertices.max(2)));
    let mut tedges = Vec::with_capacity(n - 1);
    for i in 1..n {
        // Lengths on a 1/64 grid keep slope-two halving exact.
        let len = rng.gen_range(32..=128) as f64 / 64.0;
        tedges.push((rng.gen_range(0..i), i, len));
    }
    let mut degree = vec![0usize; n];
    for &(a, b, _) in &tedges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let ends: Vec<usize> = (0..n)
        .filter(|&v| degree[v] == 1 && rng.gen_bool(opts.end_probability))
        .collect();
    let target = FiniteTree::new((0..n).map(|i| format!("t{i}")).collect(), tedges.clone(), &ends)?;

    let sheets = rng.gen_range(1..=opts.max_sheets.max(1));
    let slopes: Vec<u32> = (0..sheets)
        .map(|_| if rng.gen_bool(opts.slope_two) { 2 } else { 1 })
        .collect();
    let glue_candidates: Vec<usize> = (0..n).filter(|v| !ends.contains(v)).collect();
    let copy = |sheet: usize, v: usize| sheet * n + v;
    let mut parent: Vec<usize> = (0..sheets * n).collect();
    let mut glued = Vec::new();
    for j in 1..sheets {
        let i = rng.gen_range(0..j);
        let v = glue_candidates[rng.gen_range(0..glue_candidates.len())];
        let (ri, rj) = (find(&mut parent, copy(i, v)), find(&mut parent, copy(j, v)));
        parent[rj] = ri;
        glued.push(ri);
    }
    let mut rep_index = vec![usize::MAX; sheets * n];
    let mut labels = Vec::new();
    let mut images = Vec::new();
    for s in 0..sheets {
        for v in 0..n {
            let r = find(&mut parent, copy(s, v));
            if rep_index[r] == usize::MAX {
                rep_index[r] = labels.len();
                labels.push(format!("s{}_{}", r / n, r % n));
                images.push(TreePoint::Vertex(v));
            }
        }
    }
    let mut sedges = Vec::new();
    let mut sslopes = Vec::new();
    for s in 0..sheets {
        for &(a, b, len) in &tedges {
            let ra = rep_index[find(&mut parent, copy(s, a))];
            let rb = rep_index[find(&mut parent, copy(s, b))];
            sedges.push((ra, rb, len / slopes[s] as f64));
            sslopes.push(slopes[s]);
        }
    }
    let mut sends = Vec::new();
    let mut witness: Vec<usize> = glued.iter().map(|&r| rep_index[r]).collect();
    for s in 0..sheets {
        for v in 0..n {
            let idx = rep_index[find(&mut parent, copy(s, v))];
            if ends.contains(&v) {
                sends.push(idx);
            }
            if slopes[s] == 2 && !witness.contains(&idx) {
                witness.push(idx);
            }
        }
    }
    let source = FiniteTree::new(labels, sedges, &sends)?;
    let d = slopes.iter().map(|&s| s as usize).sum();
    TreeMap::new(source, target, images, sslopes, d, witness)
}

/// The cover with one slope raised by one, or one vertex image moved into
/// the interior of a random target edge.
pub fn mutate_cover<R: Rng + ?Sized>(map: &TreeMap, rng: &mut R) -> TreeMap {
    let tgt = map.target();
    if rng.gen_bool(0.5) || tgt.edges().is_empty() {
        let e = rng.gen_range(0..map.slopes().len());
        map.with_slope(e, map.slopes()[e] + 1)
    } else {
        let v = rng.gen_range(0..map.source().vertex_count());
        loop {
            let e = rng.gen_range(0..tgt.edges().len());
            let offset = tgt.edges()[e].length * rng.gen_range(0.1..0.9);
            let p = TreePoint::OnEdge { edge: e, offset };
            if tgt.distance(&p, &map.images()[v]) > 1e-3 {
                return map.with_image(v, p);
            }
        }
    }
}
