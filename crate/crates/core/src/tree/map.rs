//! Piecewise-linear maps between finite trees with integer slopes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Direction, FiniteTree, TreePoint, TreePointRecord, POINT_TOL};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeRecord {
    pub from: String,
    pub to: String,
    pub slope: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeMapRecord {
    pub source: FiniteTree,
    pub target: FiniteTree,
    pub vertex_images: BTreeMap<String, TreePointRecord>,
    /// Edges not listed have slope 1.
    #[serde(default)]
    pub slopes: Vec<SlopeRecord>,
    pub degree: usize,
    /// Source vertices spanning the subtree S off which the map must be a
    /// local isometry.
    #[serde(default)]
    pub witness: Vec<String>,
}

/// Each source edge maps linearly, with its integer slope, onto the
/// geodesic between the images of its endpoints. Rays past marked ends
/// continue with the slope of their edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeMapRecord", into = "TreeMapRecord")]
pub struct TreeMap {
    source: FiniteTree,
    target: FiniteTree,
    images: Vec<TreePoint>,
    slopes: Vec<u32>,
    degree: usize,
    witness: Vec<usize>,
}

impl TryFrom<TreeMapRecord> for TreeMap {
    type Error = Error;
    fn try_from(r: TreeMapRecord) -> Result<Self> {
        let n = r.source.vertex_count();
        let mut images = vec![None; n];
        for (label, p) in &r.vertex_images {
            let v = r.source.vertex(label)?;
            images[v] = Some(r.target.point_from_record(p)?);
        }
        let images = images
            .into_iter()
            .enumerate()
            .map(|(v, p)| p.ok_or_else(|| Error::Structure(format!("no image for {:?}", r.source.label(v)))))
            .collect::<Result<Vec<_>>>()?;
        let mut slopes = vec![1u32; r.source.edges().len()];
        for s in &r.slopes {
            let u = r.source.vertex(&s.from)?;
            let v = r.source.vertex(&s.to)?;
            let e = r
                .source
                .edge_between(u, v)
                .ok_or_else(|| Error::Structure(format!("no edge {:?}-{:?}", s.from, s.to)))?;
            slopes[e] = s.slope;
        }
        let witness = r.witness.iter().map(|l| r.source.vertex(l)).collect::<Result<Vec<_>>>()?;
        TreeMap::new(r.source, r.target, images, slopes, r.degree, witness)
    }
}

impl From<TreeMap> for TreeMapRecord {
    fn from(m: TreeMap) -> Self {
        let vertex_images = (0..m.source.vertex_count())
            .map(|v| (m.source.label(v).to_string(), m.target.point_to_record(&m.images[v])))
            .collect();
        let slopes = m
            .source
            .edges()
            .iter()
            .zip(&m.slopes)
            .filter(|(_, s)| **s != 1)
            .map(|(e, s)| SlopeRecord {
                from: m.source.label(e.a).to_string(),
                to: m.source.label(e.b).to_string(),
                slope: *s,
            })
            .collect();
        TreeMapRecord {
            vertex_images,
            slopes,
            degree: m.degree,
            witness: m.witness.iter().map(|&v| m.source.label(v).to_string()).collect(),
            source: m.source,
            target: m.target,
        }
    }
}

/// A point of a fiber with its local degree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberPoint {
    pub point: TreePoint,
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverFailure {
    pub check: &'static str,
    pub witness: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverReport {
    pub valid: bool,
    pub samples: usize,
    pub failures: Vec<CoverFailure>,
}

/// Interior samples per target edge in the fiber check.
pub const FIBER_SAMPLES: usize = 7;

impl TreeMap {
    pub fn new(
        source: FiniteTree,
        target: FiniteTree,
        images: Vec<TreePoint>,
        slopes: Vec<u32>,
        degree: usize,
        witness: Vec<usize>,
    ) -> Result<Self> {
        if images.len() != source.vertex_count() {
            return Err(Error::Structure("one image per source vertex is required".into()));
        }
        if slopes.len() != source.edges().len() {
            return Err(Error::Structure("one slope per source edge is required".into()));
        }
        if slopes.contains(&0) {
            return Err(Error::Structure("slopes must be positive integers".into()));
        }
        if degree == 0 {
            return Err(Error::Structure("degree must be positive".into()));
        }
        let images = images
            .into_iter()
            .map(|p| target.canonical(p))
            .collect::<Result<Vec<_>>>()?;
        if witness.iter().any(|&v| v >= source.vertex_count()) {
            return Err(Error::Structure("witness vertex out of range".into()));
        }
        Ok(Self {
            source,
            target,
            images,
            slopes,
            degree,
            witness,
        })
    }

    pub fn source(&self) -> &FiniteTree {
        &self.source
    }

    pub fn target(&self) -> &FiniteTree {
        &self.target
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn slopes(&self) -> &[u32] {
        &self.slopes
    }

    pub fn images(&self) -> &[TreePoint] {
        &self.images
    }

    pub fn witness(&self) -> &[usize] {
        &self.witness
    }

    pub(crate) fn with_slope(&self, edge: usize, slope: u32) -> TreeMap {
        let mut m = self.clone();
        m.slopes[edge] = slope;
        m
    }

    pub(crate) fn with_image(&self, v: usize, p: TreePoint) -> TreeMap {
        let mut m = self.clone();
        m.images[v] = p;
        m
    }

    /// The target end whose ray receives the ray of source end `leaf`, and
    /// the ray coordinate of the leaf's image on it.
    pub fn end_image(&self, leaf: usize) -> Result<(usize, f64)> {
        if !self.source.is_end(leaf) {
            return Err(Error::Structure(format!("{:?} is not a marked end", self.source.label(leaf))));
        }
        let e = self.source.incident(leaf)[0];
        let inner = self.source.other(e, leaf);
        let y = self.images[leaf];
        let back = self.images[inner];
        for end in self.target.ends() {
            let Some(rho) = self.target.ray_coordinate(end, &y) else { continue };
            let outward_free = match y {
                TreePoint::Vertex(v) => v == end,
                TreePoint::OnEdge { .. } => true,
            };
            if !outward_free {
                continue;
            }
            // The edge image must arrive from the inner side, so that the
            // continuation runs out toward the end.
            let inward = self.target.ray_coordinate(end, &back).map(|r| r < rho).unwrap_or(true);
            if inward && !self.target.same_point(&y, &back) {
                return Ok((end, rho));
            }
        }
        Err(Error::Structure(format!(
            "the ray of {:?} is not eventually mapped into a ray",
            self.source.label(leaf)
        )))
    }

    /// F(x).
    pub fn eval(&self, x: &TreePoint) -> Result<TreePoint> {
        let x = self.source.canonical(*x)?;
        match x {
            TreePoint::Vertex(v) => Ok(self.images[v]),
            TreePoint::OnEdge { edge, offset } => {
                let e = self.source.edges()[edge];
                let s = self.slopes[edge] as f64;
                if offset > e.length {
                    let (end, rho) = self.end_image(e.b)?;
                    Ok(self.target.ray_point(end, rho + s * (offset - e.length)))
                } else if offset < 0.0 {
                    let (end, rho) = self.end_image(e.a)?;
                    Ok(self.target.ray_point(end, rho - s * offset))
                } else {
                    Ok(self
                        .target
                        .point_along(&self.images[e.a], &self.images[e.b], s * offset))
                }
            }
        }
    }

    /// Image direction of each source direction at x, weighted by slope.
    fn direction_weights(&self, x: &TreePoint) -> Result<BTreeMap<Direction, usize>> {
        let y = self.eval(x)?;
        let mut out = BTreeMap::new();
        for d in self.source.directions_at(x) {
            let eps = (1e-4 * self.source.edges()[d.edge].length.min(1.0)).min(0.5 * self.source.room(x, d));
            let fx = self.eval(&self.source.step(x, d, eps))?;
            let image_dir = self.target.first_direction(&y, &fx);
            *out.entry(image_dir).or_insert(0) += self.slopes[d.edge] as usize;
        }
        Ok(out)
    }

    /// deg_x F: the total directional degree over one image direction (the
    /// largest, when the map is not locally surjective at x).
    pub fn local_degree(&self, x: &TreePoint) -> Result<usize> {
        Ok(self.direction_weights(x)?.values().copied().max().unwrap_or(0))
    }

    /// Source vertices where two directions share an image direction.
    pub fn critical_locus(&self) -> Result<Vec<TreePoint>> {
        let mut out = Vec::new();
        for v in 0..self.source.vertex_count() {
            let p = TreePoint::Vertex(v);
            let dirs = self.source.directions_at(&p).len();
            if self.direction_weights(&p)?.len() < dirs {
                out.push(p);
            }
        }
        Ok(out)
    }

    /// F⁻¹(y) with local degrees.
    pub fn fiber(&self, y: &TreePoint) -> Result<Vec<FiberPoint>> {
        let y = self.target.canonical(*y)?;
        let mut pts: Vec<TreePoint> = Vec::new();
        let mut push = |p: TreePoint, src: &FiniteTree| {
            if let Ok(p) = src.canonical(p) {
                if !pts.iter().any(|q| src.same_point(q, &p)) {
                    pts.push(p);
                }
            }
        };
        for (k, e) in self.source.edges().iter().enumerate() {
            let s = self.slopes[k] as f64;
            let (fa, fb) = (self.images[e.a], self.images[e.b]);
            let da = self.target.distance(&fa, &y);
            let db = self.target.distance(&y, &fb);
            let span = self.target.distance(&fa, &fb);
            if (da + db - span).abs() <= POINT_TOL * (1.0 + span) {
                push(TreePoint::OnEdge { edge: k, offset: (da / s).min(e.length) }, &self.source);
            }
            for (leaf, sign) in [(e.b, 1.0), (e.a, -1.0)] {
                if !self.source.is_end(leaf) {
                    continue;
                }
                let (end, rho) = self.end_image(leaf)?;
                if let Some(ry) = self.target.ray_coordinate(end, &y) {
                    if ry >= rho - POINT_TOL {
                        let beyond = (ry - rho).max(0.0) / s;
                        let base = if sign > 0.0 { e.length } else { 0.0 };
                        push(TreePoint::OnEdge { edge: k, offset: base + sign * beyond }, &self.source);
                    }
                }
            }
        }
        pts.into_iter()
            .map(|p| {
                Ok(FiberPoint {
                    point: p,
                    degree: self.local_degree(&p)?,
                })
            })
            .collect()
    }

    pub fn fiber_degree(&self, y: &TreePoint) -> Result<usize> {
        Ok(self.fiber(y)?.iter().map(|f| f.degree).sum())
    }

    fn describe(&self, tree: &FiniteTree, p: &TreePoint) -> String {
        match tree.point_to_record(p) {
            TreePointRecord::Vertex { vertex } => vertex,
            TreePointRecord::OnEdge { edge, offset } => format!("{}-{}@{offset:.6}", edge[0], edge[1]),
        }
    }

    /// Checks linearity, local isometry off the witness subtree, and the
    /// fiber degree sum at every target vertex and at seven interior points
    /// of each target edge.
    pub fn validate(&self) -> CoverReport {
        let mut failures = Vec::new();
        let src = &self.source;
        let tgt = &self.target;
        for (k, e) in src.edges().iter().enumerate() {
            let span = tgt.distance(&self.images[e.a], &self.images[e.b]);
            let want = self.slopes[k] as f64 * e.length;
            if (span - want).abs() > POINT_TOL * (1.0 + want) {
                failures.push(CoverFailure {
                    check: "linearity",
                    witness: format!("{}-{}", src.label(e.a), src.label(e.b)),
                    detail: format!("image length {span} but slope × length = {want}"),
                });
            }
        }
        for leaf in src.ends() {
            if let Err(err) = self.end_image(leaf) {
                failures.push(CoverFailure {
                    check: "end",
                    witness: src.label(leaf).to_string(),
                    detail: err.to_string(),
                });
            }
        }
        if !failures.is_empty() {
            return CoverReport {
                valid: false,
                samples: 0,
                failures,
            };
        }

        let s_set: BTreeSet<usize> = if self.witness.is_empty() {
            BTreeSet::new()
        } else {
            src.hull_vertices(&self.witness).unwrap_or_default()
        };
        for (k, e) in src.edges().iter().enumerate() {
            if !(s_set.contains(&e.a) && s_set.contains(&e.b)) && self.slopes[k] != 1 {
                failures.push(CoverFailure {
                    check: "isometry",
                    witness: format!("{}-{}", src.label(e.a), src.label(e.b)),
                    detail: format!("slope {} off the witness subtree", self.slopes[k]),
                });
            }
        }
        for v in 0..src.vertex_count() {
            if s_set.contains(&v) {
                continue;
            }
            let p = TreePoint::Vertex(v);
            match self.direction_weights(&p) {
                Ok(w) if w.len() < src.directions_at(&p).len() => failures.push(CoverFailure {
                    check: "isometry",
                    witness: src.label(v).to_string(),
                    detail: "directions fold together off the witness subtree".into(),
                }),
                Ok(_) => {}
                Err(err) => failures.push(CoverFailure {
                    check: "isometry",
                    witness: src.label(v).to_string(),
                    detail: err.to_string(),
                }),
            }
        }

        let mut samples: Vec<TreePoint> = (0..tgt.vertex_count()).map(TreePoint::Vertex).collect();
        for (k, e) in tgt.edges().iter().enumerate() {
            for j in 1..=FIBER_SAMPLES {
                samples.push(TreePoint::OnEdge {
                    edge: k,
                    offset: e.length * j as f64 / (FIBER_SAMPLES + 1) as f64,
                });
            }
        }
        for y in &samples {
            if let Err(f) = self.check_fiber(y) {
                failures.push(f);
            }
        }
        CoverReport {
            valid: failures.is_empty(),
            samples: samples.len(),
            failures,
        }
    }

    fn check_fiber(&self, y: &TreePoint) -> std::result::Result<(), CoverFailure> {
        let fail = |detail: String| CoverFailure {
            check: "fiber",
            witness: self.describe(&self.target, y),
            detail,
        };
        let fiber = self.fiber(y).map_err(|e| fail(e.to_string()))?;
        let dirs = self.target.directions_at(y);
        let mut totals: BTreeMap<Direction, usize> = dirs.iter().map(|d| (*d, 0)).collect();
        for f in &fiber {
            let w = self.direction_weights(&f.point).map_err(|e| fail(e.to_string()))?;
            let first = w.values().next().copied().unwrap_or(0);
            if w.len() != dirs.len() || w.values().any(|&c| c != first) {
                return Err(fail(format!(
                    "not locally surjective at {}",
                    self.describe(&self.source, &f.point)
                )));
            }
            for (d, c) in w {
                *totals.entry(d).or_insert(0) += c;
            }
        }
        let sum: usize = fiber.iter().map(|f| f.degree).sum();
        if sum != self.degree || totals.values().any(|&c| c != self.degree) {
            return Err(fail(format!(
                "fiber degree sums to {sum}, declared degree {}",
                self.degree
            )));
        }
        Ok(())
    }

    fn check_self_map(&self) -> Result<()> {
        if self.source != self.target {
            return Err(Error::Structure(
                "translation lengths need a self-map (source and target trees equal)".into(),
            ));
        }
        Ok(())
    }

    /// lim dist(x, x⁰) − dist(F x, x⁰) along the ray of `end`: the
    /// eventually constant value when the ray has slope 1, −∞ otherwise.
    pub fn translation_length_end(&self, end: usize, basepoint: &TreePoint) -> Result<f64> {
        self.check_self_map()?;
        let basepoint = self.source.canonical(*basepoint)?;
        let (image_end, rho) = self.end_image(end)?;
        let edge = self.source.incident(end)[0];
        if self.slopes[edge] >= 2 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.source.busemann(end, &basepoint) - rho - self.target.busemann(image_end, &basepoint))
    }

    /// The induced map on marked ends.
    pub fn end_map(&self, end: usize) -> Result<usize> {
        Ok(self.end_image(end)?.0)
    }
}

/// L(𝒞, F) = Σ L(α_i, F) over a cycle of ends α₁ ↦ α₂ ↦ … ↦ α₁.
pub fn cycle_translation_length(map: &TreeMap, ends: &[usize], basepoint: &TreePoint) -> Result<f64> {
    if ends.is_empty() {
        return Err(Error::Structure("empty cycle".into()));
    }
    for (i, &a) in ends.iter().enumerate() {
        let next = ends[(i + 1) % ends.len()];
        if map.end_map(a)? != next {
            return Err(Error::Structure(format!(
                "{:?} does not map to {:?}",
                map.source().label(a),
                map.source().label(next)
            )));
        }
    }
    let mut total = 0.0;
    for &a in ends {
        total += map.translation_length_end(a, basepoint)?;
    }
    Ok(total)
}
