//! One function per subcommand. Each returns the rendered output and
//! whether any sub-run failed.

use std::path::Path;

use barytree::barycentric::{
    belt_bound, belt_volume, delta_curve, extend, lipschitz_scan, operators_by, recenter,
    spectral_bound, SolverOptions,
};
use barytree::degeneration::{
    degeneration_indicator, naturality_gap, preimages_of_origin, rescale_radius, snapshot, snapshot_distances,
    translation_estimate, SnapshotEntry, DEFAULT_DEPTH_GRID,
};
use barytree::h3::{BallPoint, Isometry};
use barytree::rational::RationalMap;
use barytree::sphere::{make_quadrature, QuadratureRule};
use barytree::tree::{cycle_translation_length, fit_tree, TreePoint};
use barytree::Error;
use nalgebra::SymmetricEigen;
use serde_json::json;

use crate::config::{Analysis, RunConfig};
use crate::output::{num, opt, render_json, Meta, Table};

/// Why a command did not finish cleanly.
pub enum Failure {
    Config(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Domain(_) | Error::Structure(_) | Error::Degenerate(_) => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

pub struct Outcome {
    pub bytes: Vec<u8>,
    /// Some sub-run failed; the output carries the partial results.
    pub partial: bool,
    pub summary: Option<String>,
}

type Run = Result<Outcome, Failure>;

fn rule(cfg: &RunConfig) -> Result<QuadratureRule, Failure> {
    make_quadrature(cfg.order()).map_err(|e| Failure::Config(e.to_string()))
}

fn ball(p: Option<[f64; 3]>) -> Result<BallPoint, Failure> {
    let p = p.unwrap_or([0.0; 3]);
    BallPoint::from_coords(p[0], p[1], p[2]).map_err(|e| Failure::Config(e.to_string()))
}

fn cfg_err(e: String) -> Failure {
    Failure::Config(e)
}

fn done(bytes: Vec<u8>) -> Run {
    Ok(Outcome {
        bytes,
        partial: false,
        summary: None,
    })
}

pub fn run(command: &str, cfg: &RunConfig, base: &Path) -> Run {
    let meta = Meta::new(command, cfg);
    match command {
        "extend" => extend_cmd(cfg, base, &meta),
        "lipscan" => lipscan(cfg, base, &meta),
        "belt" => belt(cfg, base, &meta),
        "delta" => delta(cfg, &meta),
        "preimages" => preimages(cfg, base, &meta),
        "family" => family(cfg, base, &meta),
        "naturality" => naturality(cfg, base, &meta),
        "treecheck" => treecheck(cfg, base, &meta),
        "fit-tree" => fit(cfg, base, &meta),
        other => Err(Failure::Config(format!("unknown command {other:?}"))),
    }
}

fn extend_cmd(cfg: &RunConfig, base: &Path, meta: &Meta) -> Run {
    let f = cfg.map(base).map_err(cfg_err)?;
    let x = ball(cfg.point)?;
    let r = extend(&f, &x, &rule(cfg)?, &cfg.solver())?;
    let p = r.point.vector();
    done(render_json(
        meta,
        &json!({
            "point": [p.x, p.y, p.z],
            "residual": r.residual,
            "iterations": r.iterations,
        }),
    ))
}

fn lipscan(cfg: &RunConfig, base: &Path, meta: &Meta) -> Run {
    let f = cfg.map(base).map_err(cfg_err)?;
    let count = cfg.samples.unwrap_or(10_000);
    let report = lipschitz_scan(
        &f,
        count,
        cfg.seed(),
        &rule(cfg)?,
        &cfg.solver(),
        &cfg.scan.unwrap_or_default(),
    )?;
    let mut t = Table::new(vec!["index", "kind", "x", "y", "z", "depth", "norm", "relaxed"]);
    t.note("degree", report.degree);
    t.note("max_norm", num(report.max_norm));
    t.note("bound", num(report.bound));
    t.note("within_bound", report.within_bound);
    t.note("below_degree", report.below_degree);
    t.note("failures", report.failures);
    t.note("relaxed", report.relaxed);
    let hist: Vec<String> = report
        .histogram
        .iter()
        .map(|b| format!("[{},{}):{}", num(b.lo), num(b.hi), b.count))
        .collect();
    t.note("histogram", hist.join(" "));
    for (i, s) in report.samples.iter().enumerate() {
        t.rows.push(vec![
            i.to_string(),
            s.kind.to_string(),
            num(s.point[0]),
            num(s.point[1]),
            num(s.point[2]),
            num(s.depth),
            opt(s.norm),
            s.relaxed.to_string(),
        ]);
    }
    Ok(Outcome {
        bytes: t.render(meta),
        partial: false,
        summary: Some(format!(
            "max norm {} (bound {}), {} failures",
            num(report.max_norm),
            num(report.bound),
            report.failures
        )),
    })
}

fn belt(cfg: &RunConfig, base: &Path, meta: &Meta) -> Run {
    let f = cfg.map(base).map_err(cfg_err)?;
    let rule = rule(cfg)?;
    let opts = cfg.solver();
    let (g, center) = if cfg.recenter.unwrap_or(true) {
        let (g, m) = recenter(&f, &rule, &opts)?;
        (g, Some(m))
    } else {
        (f.clone(), None)
    };
    let v = belt_volume(&g, &rule, &opts)?;
    // F_y at the balanced normalized pushforward of g at the origin.
    let (fy, _, _) = operators_by(&g, &Isometry::identity(), &rule, &opts)?;
    let smallest = SymmetricEigen::new(fy)
        .eigenvalues
        .iter()
        .map(|e| e.abs())
        .fold(f64::INFINITY, f64::min);
    let d = f.degree();
    done(render_json(
        meta,
        &json!({
            "degree": d,
            "v": v.v,
            "v1": v.v1,
            "v2": v.v2,
            "belt_bound": belt_bound(d),
            "belt_bound_holds": v.v >= belt_bound(d) * (1.0 - 1e-3),
            "smallest_fy_eigenvalue": smallest,
            "spectral_bound": spectral_bound(d),
            "recentered_by": center.map(|c| c.origin_image().map(|p| { let v = p.vector(); [v.x, v.y, v.z] }).ok()),
        }),
    ))
}

fn delta(cfg: &RunConfig, meta: &Meta) -> Run {
    let grid = cfg.grid.clone().unwrap_or_else(|| vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0]);
    let curve = delta_curve(&grid, &rule(cfg)?, &cfg.solver())?;
    let mut t = Table::new(vec!["r", "delta"]);
    t.note("positive", curve.positive);
    t.note(
        "decaying",
        curve.decaying.map(|b| b.to_string()).unwrap_or_else(|| "n/a".into()),
    );
    for (r, d) in &curve.points {
        t.rows.push(vec![num(*r), num(*d)]);
    }
    done(t.render(meta))
}

fn snapshot_table(entries: &[SnapshotEntry], scale: f64) -> Table {
    let mut t = Table::new(vec!["label", "x", "y", "z"]);
    t.note("scale", num(scale));
    for e in entries {
        t.rows.push(vec![e.label.clone(), num(e.coords[0]), num(e.coords[1]), num(e.coords[2])]);
    }
    t
}

fn preimages(cfg: &RunConfig, base: &Path, meta: &Meta) -> Run {
    let f = cfg.map(base).map_err(cfg_err)?;
    let rule = rule(cfg)?;
    let set = preimages_of_origin(&f, &rule, &cfg.search())?;
    let radius = rescale_radius(&set);
    if let Some(marked) = &cfg.marked {
        let scale = cfg.scale.unwrap_or(radius);
        let entries = snapshot(&f, scale, marked, Some(&set), &rule, &cfg.solver())?;
        return done(snapshot_table(&entries, scale).render(meta));
    }
    let mut t = Table::new(vec!["index", "x", "y", "z", "depth", "residual"]);
    t.note("radius", num(radius));
    t.note("seeds", set.seed_count);
    for (i, s) in set.solutions.iter().enumerate() {
        t.rows.push(vec![
            i.to_string(),
            num(s.point[0]),
            num(s.point[1]),
            num(s.point[2]),
            num(s.depth),
            num(s.residual),
        ]);
    }
    done(t.render(meta))
}

fn family(cfg: &RunConfig, base: &Path, meta: &Meta) -> Run {
    let fam = cfg.family(base).map_err(cfg_err)?;
    let rule = rule(cfg)?;
    match cfg.analysis.clone().unwrap_or(Analysis::Indicator) {
        Analysis::Indicator => {
            let ind = degeneration_indicator(&fam, &rule, &cfg.search())?;
            let mut t = Table::new(vec!["parameter_re", "parameter_im", "radius", "resultant", "solutions", "error"]);
            t.note("radius_increasing", ind.radius_increasing);
            t.note("resultant_decreasing", ind.resultant_decreasing);
            let partial = ind.rows.iter().any(|r| r.error.is_some());
            for r in &ind.rows {
                t.rows.push(vec![
                    num(r.parameter[0]),
                    num(r.parameter[1]),
                    opt(r.radius),
                    num(r.resultant),
                    r.solutions.to_string(),
                    r.error.clone().unwrap_or_default(),
                ]);
            }
            Ok(Outcome {
                bytes: t.render(meta),
                partial,
                summary: None,
            })
        }
        Analysis::Translation => {
            let grid = cfg.depth_grid.clone().unwrap_or_else(|| DEFAULT_DEPTH_GRID.to_vec());
            let est = translation_estimate(&fam, cfg.period.unwrap_or(1), &rule, &grid, &cfg.search(), &cfg.solver())?;
            let mut header = vec!["parameter_re", "parameter_im", "r", "L", "L_over_r", "displacement_ratio", "gap"];
            let labels: Vec<String> = grid.iter().map(|t| format!("displacement_t{t}")).collect();
            let leaked: Vec<&'static str> = labels.into_iter().map(|s| &*Box::leak(s.into_boxed_str())).collect();
            header.extend(leaked);
            let mut t = Table::new(header);
            t.note("gaps_decreasing", est.gaps_decreasing);
            for r in &est.records {
                let mut row = vec![
                    num(r.parameter[0]),
                    num(r.parameter[1]),
                    num(r.radius),
                    num(r.cycle_length),
                    num(r.multiplier_ratio),
                    num(r.displacement_ratio),
                    num(r.gap),
                ];
                row.extend(r.displacements.iter().map(|(_, v)| num(*v)));
                t.rows.push(row);
            }
            done(t.render(meta))
        }
    }
}

fn naturality(cfg: &RunConfig, base: &Path, meta: &Meta) -> Run {
    let rule = rule(cfg)?;
    let opts: SolverOptions = cfg.solver();
    let n = cfg.iterate.unwrap_or(2);
    let x = ball(cfg.point)?;
    let maps: Vec<([f64; 2], RationalMap)> = match (&cfg.map, &cfg.family) {
        (Some(_), None) => vec![([f64::NAN, f64::NAN], cfg.map(base).map_err(cfg_err)?)],
        (None, Some(_)) => cfg
            .family(base)
            .map_err(cfg_err)?
            .members()?
            .into_iter()
            .map(|(c, f)| ([c.re, c.im], f))
            .collect(),
        _ => return Err(Failure::Config("give exactly one of \"map\" and \"family\"".into())),
    };
    let mut t = Table::new(vec!["parameter_re", "parameter_im", "radius", "gap", "gap_over_radius", "error"]);
    t.note("iterate", n);
    let mut partial = false;
    for (c, f) in &maps {
        let radius = preimages_of_origin(f, &rule, &cfg.search()).map(|s| rescale_radius(&s));
        let gap = naturality_gap(f, n, &x, &rule, &opts);
        let (r, g, ratio, err) = match (radius, gap) {
            (Ok(r), Ok(g)) => (Some(r), Some(g), Some(g / r), String::new()),
            (r, g) => {
                partial = true;
                let msg = [r.as_ref().err(), g.as_ref().err()]
                    .into_iter()
                    .flatten()
                    .map(|e| e.to_string())
                    .collect::<Vec<_>>()
                    .join("; ");
                (r.ok(), g.ok(), None, msg)
            }
        };
        let p = |v: f64| if v.is_nan() { String::new() } else { num(v) };
        t.rows.push(vec![p(c[0]), p(c[1]), opt(r), opt(g), opt(ratio), err]);
    }
    Ok(Outcome {
        bytes: t.render(meta),
        partial,
        summary: None,
    })
}

fn treecheck(cfg: &RunConfig, base: &Path, meta: &Meta) -> Run {
    let map = cfg
        .tree_map
        .as_ref()
        .ok_or_else(|| Failure::Config("missing field \"tree_map\"".into()))?
        .load(base)
        .map_err(cfg_err)?;
    let report = map.validate();
    let mut translation = None;
    if let Some(ends) = &cfg.ends {
        let ids = ends
            .iter()
            .map(|l| map.source().vertex(l))
            .collect::<barytree::Result<Vec<_>>>()?;
        let basepoint = match &cfg.basepoint {
            Some(b) => map.source().point_from_record(b)?,
            None => TreePoint::Vertex(0),
        };
        let l = cycle_translation_length(&map, &ids, &basepoint)?;
        translation = Some(num(l));
    }
    let summary = if report.valid {
        format!("valid, d = {}", map.degree())
    } else {
        format!("invalid, {} failures", report.failures.len())
    };
    done_with(
        render_json(
            meta,
            &json!({
                "valid": report.valid,
                "degree": map.degree(),
                "samples": report.samples,
                "failures": report.failures,
                "critical_locus": map.critical_locus()?.iter().map(|p| map.source().point_to_record(p)).collect::<Vec<_>>(),
                "cycle_translation_length": translation,
                "summary": summary,
            }),
        ),
        summary,
    )
}

fn done_with(bytes: Vec<u8>, summary: String) -> Run {
    Ok(Outcome {
        bytes,
        partial: false,
        summary: Some(summary),
    })
}

/// Reads a snapshot CSV: `# scale: r` among the metadata lines, then a
/// `label,x,y,z` table.
fn read_snapshot(path: &Path) -> Result<(Vec<SnapshotEntry>, f64), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut scale = None;
    let mut body = String::new();
    for line in text.lines() {
        if let Some(meta) = line.strip_prefix('#') {
            if let Some(v) = meta.trim().strip_prefix("scale:") {
                scale = v.trim().parse::<f64>().ok();
            }
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let scale = scale.ok_or_else(|| Failure::Config("snapshot has no \"# scale:\" line".into()))?;
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Failure::Config(format!("snapshot: {e}")))?;
        let get = |k: usize| -> Result<f64, Failure> {
            rec.get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Failure::Config(format!("snapshot: bad number in column {k}")))
        };
        entries.push(SnapshotEntry {
            label: rec.get(0).unwrap_or_default().to_string(),
            coords: [get(1)?, get(2)?, get(3)?],
        });
    }
    Ok((entries, scale))
}

fn fit(cfg: &RunConfig, base: &Path, meta: &Meta) -> Run {
    let (labels, d) = match (&cfg.snapshot, &cfg.distances) {
        (Some(p), None) => {
            let path = if p.is_absolute() { p.clone() } else { base.join(p) };
            let (entries, scale) = read_snapshot(&path)?;
            let d = snapshot_distances(&entries, scale)?;
            (entries.into_iter().map(|e| e.label).collect::<Vec<_>>(), d)
        }
        (None, Some(t)) => (t.labels.clone(), t.distances.clone()),
        _ => return Err(Failure::Config("give exactly one of \"snapshot\" and \"distances\"".into())),
    };
    let tol = cfg.tolerance.unwrap_or(0.05);
    let r = fit_tree(&labels, &d, tol)?;
    let positions: serde_json::Map<String, serde_json::Value> = labels
        .iter()
        .zip(&r.positions)
        .map(|(l, &v)| (l.clone(), json!(r.tree.label(v))))
        .collect();
    done(render_json(
        meta,
        &json!({
            "tree": r.tree,
            "positions": positions,
            "distortion": r.distortion,
            "tolerance": tol,
            "within_tolerance": r.within_tolerance,
            "worst_quadruple": r.worst_quadruple,
        }),
    ))
}
