//! Fitting a finite tree to a labelled distance matrix by inserting
//! points at their Gromov products with respect to the first point.

use serde::Serialize;

use super::{FiniteTree, TreePoint};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub tree: FiniteTree,
    /// Tree vertex of each input label.
    #[serde(skip)]
    pub positions: Vec<usize>,
    /// max |d_tree − d_input| over all pairs.
    pub distortion: f64,
    pub within_tolerance: bool,
    /// The quadruple violating the four-point condition the most, with
    /// half the gap between its two largest pair sums.
    pub worst_quadruple: Option<([String; 4], f64)>,
}

/// Half the gap between the two largest of d_ij + d_kl, d_ik + d_jl,
/// d_il + d_jk; zero exactly when the quadruple embeds in a tree.
pub fn four_point_violation(d: &[Vec<f64>], q: [usize; 4]) -> f64 {
    let [i, j, k, l] = q;
    let mut s = [d[i][j] + d[k][l], d[i][k] + d[j][l], d[i][l] + d[j][k]];
    s.sort_by(|a, b| a.total_cmp(b));
    0.5 * (s[2] - s[1])
}

fn check_input(labels: &[String], d: &[Vec<f64>]) -> Result<()> {
    let n = labels.len();
    if n < 2 {
        return Err(Error::Domain("tree fitting needs at least two points".into()));
    }
    if d.len() != n || d.iter().any(|r| r.len() != n) {
        return Err(Error::Domain("distance matrix shape does not match labels".into()));
    }
    for i in 0..n {
        if d[i][i].abs() > 1e-12 {
            return Err(Error::Domain(format!("nonzero self-distance at {:?}", labels[i])));
        }
        for j in 0..n {
            if !d[i][j].is_finite() || d[i][j] < 0.0 || (d[i][j] - d[j][i]).abs() > 1e-9 * (1.0 + d[i][j]) {
                return Err(Error::Domain(format!(
                    "distance {:?}-{:?} is not a finite symmetric nonnegative value",
                    labels[i], labels[j]
                )));
            }
        }
        if labels[..i].contains(&labels[i]) {
            return Err(Error::Domain(format!("duplicate label {:?}", labels[i])));
        }
    }
    Ok(())
}

const ZERO: f64 = 1e-12;

struct Builder {
    labels: Vec<String>,
    edges: Vec<(usize, usize, f64)>,
}

impl Builder {
    fn tree(&self) -> Result<FiniteTree> {
        FiniteTree::new(self.labels.clone(), self.edges.clone(), &[])
    }

    /// Vertex at distance g from `from` toward `to`, subdividing an edge
    /// when needed.
    fn locate(&mut self, from: usize, to: usize, g: f64, fresh: &mut dyn FnMut() -> String) -> Result<usize> {
        let tree = self.tree()?;
        let path = tree.vertex_path(from, to);
        let mut walked = 0.0;
        for w in path.windows(2) {
            if (g - walked).abs() <= ZERO {
                return Ok(w[0]);
            }
            let e = tree.edge_between(w[0], w[1]).expect("path edge");
            let len = tree.edges()[e].length;
            if g < walked + len - ZERO {
                let s = self.labels.len();
                self.labels.push(fresh());
                let k = self
                    .edges
                    .iter()
                    .position(|&(a, b, _)| (a, b) == (w[0], w[1]) || (a, b) == (w[1], w[0]))
                    .expect("edge present");
                self.edges.remove(k);
                self.edges.push((w[0], s, g - walked));
                self.edges.push((s, w[1], walked + len - g));
                return Ok(s);
            }
            walked += len;
        }
        Ok(to)
    }
}

/// A tree whose labelled vertices approximate the input distances. The
/// first label is the basepoint. Ties in the insertion choice go to the
/// lexicographically smallest label.
pub fn fit_tree(labels: &[String], d: &[Vec<f64>], tol: f64) -> Result<FitReport> {
    check_input(labels, d)?;
    let n = labels.len();
    let mut steiner = 0usize;
    let mut fresh = || loop {
        let name = format!("~s{steiner}");
        steiner += 1;
        if !labels.contains(&name) {
            return name;
        }
    };
    let mut b = Builder {
        labels: vec![labels[0].clone()],
        edges: Vec::new(),
    };
    let mut positions = vec![0usize];
    for k in 1..n {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..k {
            let g = 0.5 * (d[0][k] + d[0][i] - d[k][i]);
            let better = match best {
                None => true,
                Some((bg, bi)) => g > bg + ZERO || ((g - bg).abs() <= ZERO && labels[i] < labels[bi]),
            };
            if better {
                best = Some((g, i));
            }
        }
        let (g, i) = best.expect("k ≥ 1");
        let g = g.clamp(0.0, d[0][i].min(d[0][k]));
        let attach = b.locate(positions[0], positions[i], g, &mut fresh)?;
        let pendant = d[0][k] - g;
        if pendant <= ZERO {
            if b.labels[attach].starts_with("~s") && !labels.contains(&b.labels[attach]) {
                b.labels[attach] = labels[k].clone();
            }
            positions.push(attach);
        } else {
            let v = b.labels.len();
            b.labels.push(labels[k].clone());
            b.edges.push((attach, v, pendant));
            positions.push(v);
        }
    }
    let tree = b.tree()?;
    let mut distortion: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let t = tree.distance(&TreePoint::Vertex(positions[i]), &TreePoint::Vertex(positions[j]));
            distortion = distortion.max((t - d[i][j]).abs());
        }
    }
    let mut worst: Option<([usize; 4], f64)> = None;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                for l in k + 1..n {
                    let v = four_point_violation(d, [i, j, k, l]);
                    if worst.map(|(_, w)| v > w).unwrap_or(true) {
                        worst = Some(([i, j, k, l], v));
                    }
                }
            }
        }
    }
    Ok(FitReport {
        tree,
        positions,
        distortion,
        within_tolerance: distortion <= tol,
        worst_quadruple: worst.map(|(q, v)| (q.map(|i| labels[i].clone()), v)),
    })
}
