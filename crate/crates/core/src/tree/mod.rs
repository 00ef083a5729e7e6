//! Finite metric trees with marked ends, branched coverings between them,
//! translation lengths of ends, and tree fitting for rescaled snapshots.
//!
//! A marked end is a leaf whose incident edge continues past the leaf as
//! an infinite ray. Points on that ray are edge points with offset beyond
//! the edge's length (or below zero when the end is the edge's first
//! vertex).

mod fit;
mod map;
mod random;

pub use fit::{fit_tree, four_point_violation, FitReport};
pub use map::{
    cycle_translation_length, CoverFailure, CoverReport, FiberPoint, TreeMap, TreeMapRecord,
};
pub use random::{mutate_cover, random_cover, CoverOptions};

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offsets and distances closer than this are the same point.
pub const POINT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub from: String,
    pub to: String,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeRecord {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeRecord>,
    #[serde(default)]
    pub ends: Vec<String>,
}

/// A finite tree with positive edge lengths and a set of marked ends.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "TreeRecord", into = "TreeRecord")]
pub struct FiniteTree {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
    ends: Vec<bool>,
    adjacency: Vec<Vec<usize>>,
    dist: Vec<Vec<f64>>,
}

impl PartialEq for FiniteTree {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels && self.edges == other.edges && self.ends == other.ends
    }
}

impl TryFrom<TreeRecord> for FiniteTree {
    type Error = Error;
    fn try_from(r: TreeRecord) -> Result<Self> {
        let index: HashMap<String, usize> =
            r.vertices.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        let lookup = |l: &str| {
            index
                .get(l)
                .copied()
                .ok_or_else(|| Error::Structure(format!("unknown vertex {l:?}")))
        };
        let edges = r
            .edges
            .iter()
            .map(|e| Ok((lookup(&e.from)?, lookup(&e.to)?, e.length)))
            .collect::<Result<Vec<_>>>()?;
        let ends = r.ends.iter().map(|l| lookup(l)).collect::<Result<Vec<_>>>()?;
        FiniteTree::new(r.vertices, edges, &ends)
    }
}

impl From<FiniteTree> for TreeRecord {
    fn from(t: FiniteTree) -> Self {
        TreeRecord {
            edges: t
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    from: t.labels[e.a].clone(),
                    to: t.labels[e.b].clone(),
                    length: e.length,
                })
                .collect(),
            ends: (0..t.labels.len())
                .filter(|&v| t.ends[v])
                .map(|v| t.labels[v].clone())
                .collect(),
            vertices: t.labels,
        }
    }
}

/// A point of a tree: a vertex, or a position on an edge measured from
/// the edge's first vertex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TreePoint {
    Vertex(usize),
    OnEdge { edge: usize, offset: f64 },
}

/// A germ of paths leaving a point along an edge, in the direction of
/// increasing offset when `forward`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Direction {
    pub edge: usize,
    pub forward: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreePointRecord {
    Vertex { vertex: String },
    OnEdge { edge: [String; 2], offset: f64 },
}

impl FiniteTree {
    pub fn new(labels: Vec<String>, edges: Vec<(usize, usize, f64)>, ends: &[usize]) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Structure("a tree needs at least one vertex".into()));
        }
        let mut index = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::Structure("empty vertex label".into()));
            }
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::Structure(format!("duplicate vertex {l:?}")));
            }
        }
        if edges.len() + 1 != n {
            return Err(Error::Structure(format!(
                "{} vertices need {} edges, got {}",
                n,
                n - 1,
                edges.len()
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut es = Vec::with_capacity(edges.len());
        for (k, &(a, b, length)) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(Error::Structure(format!("edge {k} references a missing vertex")));
            }
            if a == b {
                return Err(Error::Structure(format!("edge {k} is a loop at {:?}", labels[a])));
            }
            if !(length > 0.0) || !length.is_finite() {
                return Err(Error::Structure(format!(
                    "edge {:?}-{:?} has length {length}",
                    labels[a], labels[b]
                )));
            }
            adjacency[a].push(k);
            adjacency[b].push(k);
            es.push(Edge { a, b, length });
        }
        let mut end_flags = vec![false; n];
        for &v in ends {
            if v >= n {
                return Err(Error::Structure("end references a missing vertex".into()));
            }
            if adjacency[v].len() != 1 {
                return Err(Error::Structure(format!("end {:?} is not a leaf", labels[v])));
            }
            end_flags[v] = true;
        }
        let mut t = FiniteTree {
            labels,
            index,
            edges: es,
            ends: end_flags,
            adjacency,
            dist: Vec::new(),
        };
        t.dist = (0..n).map(|s| t.distances_from(s)).collect::<Result<Vec<_>>>()?;
        Ok(t)
    }

    fn distances_from(&self, s: usize) -> Result<Vec<f64>> {
        let n = self.labels.len();
        let mut d = vec![f64::NAN; n];
        d[s] = 0.0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.adjacency[v] {
                let w = self.other(e, v);
                if d[w].is_nan() {
                    d[w] = d[v] + self.edges[e].length;
                    queue.push_back(w);
                }
            }
        }
        if d.iter().any(|x| x.is_nan()) {
            return Err(Error::Structure("tree is not connected".into()));
        }
        Ok(d)
    }

    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vertex(&self, label: &str) -> Result<usize> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::Structure(format!("unknown vertex {label:?}")))
    }

    pub fn is_end(&self, v: usize) -> bool {
        self.ends[v]
    }

    pub fn ends(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&v| self.ends[v]).collect()
    }

    pub fn incident(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        self.adjacency[u]
            .iter()
            .copied()
            .find(|&e| self.other(e, u) == v)
    }

    pub fn other(&self, e: usize, v: usize) -> usize {
        let ed = &self.edges[e];
        if ed.a == v {
            ed.b
        } else {
            ed.a
        }
    }

    pub fn vertex_distance(&self, u: usize, v: usize) -> f64 {
        self.dist[u][v]
    }

    /// Vertices on the path from u to v, both included.
    pub fn vertex_path(&self, u: usize, v: usize) -> Vec<usize> {
        let mut path = vec![u];
        let mut cur = u;
        while cur != v {
            let next = self.adjacency[cur]
                .iter()
                .map(|&e| self.other(e, cur))
                .min_by(|&a, &b| self.dist[a][v].total_cmp(&self.dist[b][v]))
                .expect("connected tree");
            path.push(next);
            cur = next;
        }
        path
    }

    /// Replaces on-edge points within tolerance of a vertex by that
    /// vertex. Rejects offsets on rays that do not exist.
    pub fn canonical(&self, p: TreePoint) -> Result<TreePoint> {
        match p {
            TreePoint::Vertex(v) if v < self.labels.len() => Ok(p),
            TreePoint::Vertex(_) => Err(Error::Structure("vertex out of range".into())),
            TreePoint::OnEdge { edge, offset } => {
                let e = self
                    .edges
                    .get(edge)
                    .ok_or_else(|| Error::Structure("edge out of range".into()))?;
                if !offset.is_finite() {
                    return Err(Error::Structure("non-finite edge offset".into()));
                }
                if offset.abs() <= POINT_TOL {
                    Ok(TreePoint::Vertex(e.a))
                } else if (offset - e.length).abs() <= POINT_TOL {
                    Ok(TreePoint::Vertex(e.b))
                } else if offset < 0.0 && !self.ends[e.a] || offset > e.length && !self.ends[e.b] {
                    Err(Error::Structure(format!(
                        "offset {offset} leaves edge {:?}-{:?}",
                        self.labels[e.a], self.labels[e.b]
                    )))
                } else {
                    Ok(p)
                }
            }
        }
    }

    pub fn point_from_record(&self, r: &TreePointRecord) -> Result<TreePoint> {
        match r {
            TreePointRecord::Vertex { vertex } => Ok(TreePoint::Vertex(self.vertex(vertex)?)),
            TreePointRecord::OnEdge { edge, offset } => {
                let u = self.vertex(&edge[0])?;
                let v = self.vertex(&edge[1])?;
                let e = self.edge_between(u, v).ok_or_else(|| {
                    Error::Structure(format!("no edge between {:?} and {:?}", edge[0], edge[1]))
                })?;
                let off = if self.edges[e].a == u {
                    *offset
                } else {
                    self.edges[e].length - offset
                };
                self.canonical(TreePoint::OnEdge { edge: e, offset: off })
            }
        }
    }

    pub fn point_to_record(&self, p: &TreePoint) -> TreePointRecord {
        match *p {
            TreePoint::Vertex(v) => TreePointRecord::Vertex {
                vertex: self.labels[v].clone(),
            },
            TreePoint::OnEdge { edge, offset } => {
                let e = &self.edges[edge];
                TreePointRecord::OnEdge {
                    edge: [self.labels[e.a].clone(), self.labels[e.b].clone()],
                    offset,
                }
            }
        }
    }

    /// Offset of p along edge e, if p lies on it (endpoints included).
    pub fn offset_on(&self, e: usize, p: &TreePoint) -> Option<f64> {
        let ed = &self.edges[e];
        match *p {
            TreePoint::OnEdge { edge, offset } if edge == e => Some(offset),
            TreePoint::Vertex(v) if v == ed.a => Some(0.0),
            TreePoint::Vertex(v) if v == ed.b => Some(ed.length),
            _ => None,
        }
    }

    fn vertex_to_point(&self, v: usize, p: &TreePoint) -> f64 {
        match *p {
            TreePoint::Vertex(w) => self.dist[v][w],
            TreePoint::OnEdge { edge, offset } => {
                let e = &self.edges[edge];
                (offset.abs() + self.dist[e.a][v]).min((e.length - offset).abs() + self.dist[e.b][v])
            }
        }
    }

    pub fn distance(&self, p: &TreePoint, q: &TreePoint) -> f64 {
        match (*p, *q) {
            (TreePoint::Vertex(v), _) => self.vertex_to_point(v, q),
            (_, TreePoint::Vertex(w)) => self.vertex_to_point(w, p),
            (TreePoint::OnEdge { edge: e1, offset: t1 }, TreePoint::OnEdge { edge: e2, offset: t2 }) => {
                if e1 == e2 {
                    return (t1 - t2).abs();
                }
                let e = &self.edges[e1];
                (t1.abs() + self.vertex_to_point(e.a, q))
                    .min((e.length - t1).abs() + self.vertex_to_point(e.b, q))
            }
        }
    }

    pub fn same_point(&self, p: &TreePoint, q: &TreePoint) -> bool {
        self.distance(p, q) <= POINT_TOL
    }

    /// All directions at p.
    pub fn directions_at(&self, p: &TreePoint) -> Vec<Direction> {
        match *p {
            TreePoint::OnEdge { edge, .. } => vec![
                Direction { edge, forward: false },
                Direction { edge, forward: true },
            ],
            TreePoint::Vertex(v) => {
                let mut out: Vec<Direction> = self.adjacency[v]
                    .iter()
                    .map(|&e| Direction {
                        edge: e,
                        forward: self.edges[e].a == v,
                    })
                    .collect();
                if self.ends[v] {
                    let e = self.adjacency[v][0];
                    out.push(Direction {
                        edge: e,
                        forward: self.edges[e].b == v,
                    });
                }
                out
            }
        }
    }

    /// The point reached by moving `eps` from p in direction d.
    pub fn step(&self, p: &TreePoint, d: Direction, eps: f64) -> TreePoint {
        let off = self.offset_on(d.edge, p).expect("direction is based at p");
        TreePoint::OnEdge {
            edge: d.edge,
            offset: if d.forward { off + eps } else { off - eps },
        }
    }

    /// Length available from p in direction d before the far vertex of
    /// its edge; unbounded out along an end.
    pub fn room(&self, p: &TreePoint, d: Direction) -> f64 {
        let e = &self.edges[d.edge];
        let off = self.offset_on(d.edge, p).expect("direction is based at p");
        match (d.forward, self.ends[e.b], self.ends[e.a]) {
            (true, true, _) | (false, _, true) => f64::INFINITY,
            (true, false, _) => e.length - off,
            (false, _, false) => off,
        }
    }

    fn probe_length(&self, d: Direction, p: &TreePoint, q: &TreePoint) -> f64 {
        (0.25 * self.distance(p, q)).min(1e-4 * self.edges[d.edge].length)
    }

    /// The direction at p of the geodesic to q (p ≠ q).
    pub fn first_direction(&self, p: &TreePoint, q: &TreePoint) -> Direction {
        let dirs = self.directions_at(p);
        let here = self.distance(p, q);
        *dirs
            .iter()
            .min_by(|a, b| {
                let da = self.distance(&self.step(p, **a, self.probe_length(**a, p, q)), q)
                    - here
                    + self.probe_length(**a, p, q);
                let db = self.distance(&self.step(p, **b, self.probe_length(**b, p, q)), q)
                    - here
                    + self.probe_length(**b, p, q);
                da.total_cmp(&db)
            })
            .expect("a tree point has a direction unless the tree is a single vertex")
    }

    /// The point at distance s from p on the geodesic [p, q].
    pub fn point_along(&self, p: &TreePoint, q: &TreePoint, s: f64) -> TreePoint {
        let total = self.distance(p, q);
        if s <= POINT_TOL {
            return *p;
        }
        if s >= total - POINT_TOL {
            return *q;
        }
        let mut cur = *p;
        let mut remaining = s;
        loop {
            let d = self.first_direction(&cur, q);
            let e = &self.edges[d.edge];
            let off = self.offset_on(d.edge, &cur).expect("on edge");
            let end = match self.offset_on(d.edge, q) {
                Some(qt) if (qt > off) == d.forward && qt != off => qt,
                _ => {
                    if d.forward {
                        e.length
                    } else {
                        0.0
                    }
                }
            };
            let seg = (end - off).abs();
            if remaining <= seg + POINT_TOL {
                let o = if d.forward { off + remaining } else { off - remaining };
                return self
                    .canonical(TreePoint::OnEdge { edge: d.edge, offset: o })
                    .unwrap_or(TreePoint::OnEdge { edge: d.edge, offset: o });
            }
            remaining -= seg;
            cur = if end == e.length {
                TreePoint::Vertex(e.b)
            } else if end == 0.0 {
                TreePoint::Vertex(e.a)
            } else {
                TreePoint::OnEdge { edge: d.edge, offset: end }
            };
        }
    }

    /// Whether p lies in the subtree spanned by the vertex set (whole
    /// edges between member vertices, no rays).
    pub fn in_subtree(&self, p: &TreePoint, vertices: &BTreeSet<usize>) -> bool {
        match *p {
            TreePoint::Vertex(v) => vertices.contains(&v),
            TreePoint::OnEdge { edge, offset } => {
                let e = &self.edges[edge];
                offset >= 0.0 && offset <= e.length && vertices.contains(&e.a) && vertices.contains(&e.b)
            }
        }
    }

    /// Vertex set of the smallest subtree containing the targets.
    pub fn hull_vertices(&self, targets: &[usize]) -> Result<BTreeSet<usize>> {
        let Some(&first) = targets.first() else {
            return Err(Error::Structure("hull of an empty set".into()));
        };
        if targets.iter().any(|&v| v >= self.labels.len()) {
            return Err(Error::Structure("hull target out of range".into()));
        }
        let mut set = BTreeSet::new();
        for &t in targets {
            set.extend(self.vertex_path(first, t));
        }
        Ok(set)
    }

    /// The convex hull of the labelled targets as a tree of its own.
    /// Targets that are ends of this tree remain ends.
    pub fn hull(&self, targets: &[&str]) -> Result<FiniteTree> {
        let ids = targets.iter().map(|l| self.vertex(l)).collect::<Result<Vec<_>>>()?;
        let set = self.hull_vertices(&ids)?;
        self.induced(&set, &ids)
    }

    fn induced(&self, set: &BTreeSet<usize>, keep_ends: &[usize]) -> Result<FiniteTree> {
        let order: Vec<usize> = set.iter().copied().collect();
        let pos: HashMap<usize, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let edges: Vec<(usize, usize, f64)> = self
            .edges
            .iter()
            .filter(|e| set.contains(&e.a) && set.contains(&e.b))
            .map(|e| (pos[&e.a], pos[&e.b], e.length))
            .collect();
        let labels: Vec<String> = order.iter().map(|&v| self.labels[v].clone()).collect();
        let ends: Vec<usize> = order
            .iter()
            .filter(|&&v| self.ends[v] && keep_ends.contains(&v))
            .map(|v| pos[v])
            .collect();
        FiniteTree::new(labels, edges, &ends)
    }

    /// The closest point of the subtree spanned by `vertices` (assumed
    /// connected) to p.
    pub fn project(&self, p: &TreePoint, vertices: &BTreeSet<usize>) -> Result<TreePoint> {
        if vertices.is_empty() {
            return Err(Error::Structure("projection onto an empty subtree".into()));
        }
        if self.in_subtree(p, vertices) {
            return Ok(*p);
        }
        let best = vertices
            .iter()
            .copied()
            .min_by(|&a, &b| {
                self.vertex_to_point(a, p)
                    .total_cmp(&self.vertex_to_point(b, p))
                    .then(a.cmp(&b))
            })
            .expect("nonempty");
        Ok(TreePoint::Vertex(best))
    }

    /// Signed position along the ray of end `leaf`: zero at the leaf,
    /// positive past it, minus the distance to the leaf on its edge.
    /// `None` off the end's edge.
    pub fn ray_coordinate(&self, leaf: usize, p: &TreePoint) -> Option<f64> {
        let e = self.adjacency[leaf][0];
        let ed = &self.edges[e];
        let t = self.offset_on(e, p)?;
        Some(if ed.b == leaf { t - ed.length } else { -t })
    }

    /// The point with ray coordinate `rho` on the ray of end `leaf`.
    pub fn ray_point(&self, leaf: usize, rho: f64) -> TreePoint {
        let e = self.adjacency[leaf][0];
        let ed = &self.edges[e];
        let offset = if ed.b == leaf { ed.length + rho } else { -rho };
        self.canonical(TreePoint::OnEdge { edge: e, offset })
            .unwrap_or(TreePoint::OnEdge { edge: e, offset })
    }

    /// lim dist(z, x) − ρ(z) as z runs out the ray of `leaf`.
    pub fn busemann(&self, leaf: usize, x: &TreePoint) -> f64 {
        match self.ray_coordinate(leaf, x) {
            Some(rho) if rho > 0.0 => -rho,
            _ => self.vertex_to_point(leaf, x),
        }
    }
}

#[cfg(test)]
mod tests;
