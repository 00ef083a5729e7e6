//! Run configuration: one JSON object, validated against the command
//! before anything runs.

use std::fs;
use std::path::{Path, PathBuf};

use barytree::barycentric::{ScanOptions, SolverOptions};
use barytree::degeneration::{FamilySpec, Marked, SearchSpec};
use barytree::rational::RationalMap;
use barytree::tree::{TreeMap, TreePointRecord};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const DEFAULT_ORDER: usize = 30;

/// An inline value or a path to a JSON file holding it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    File(PathBuf),
    Inline(T),
}

impl<T: DeserializeOwned + Clone> Source<T> {
    pub fn load(&self, base: &Path) -> Result<T, String> {
        match self {
            Source::Inline(v) => Ok(v.clone()),
            Source::File(p) => {
                let path = if p.is_absolute() { p.clone() } else { base.join(p) };
                let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Indicator,
    Translation,
}

/// Labelled points with pairwise distances, the alternative to a
/// snapshot file for fit-tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceTable {
    pub labels: Vec<String>,
    pub distances: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature_order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverOptions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<Source<RationalMap>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Source<FamilySpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanOptions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recenter: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marked: Option<Vec<Marked>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analysis: Option<Analysis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterate: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree_map: Option<Source<TreeMap>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ends: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basepoint: Option<TreePointRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distances: Option<DistanceTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

const COMMON: &[&str] = &["command", "seed", "quadrature_order", "solver", "out"];

/// Keys each command accepts beyond the common ones.
pub fn allowed_keys(command: &str) -> Option<&'static [&'static str]> {
    Some(match command {
        "extend" => &["map", "point"],
        "lipscan" => &["map", "samples", "scan"],
        "belt" => &["map", "recenter"],
        "delta" => &["grid"],
        "preimages" => &["map", "search", "marked", "scale"],
        "family" => &["family", "analysis", "search", "period", "depth_grid"],
        "naturality" => &["map", "family", "iterate", "point", "search"],
        "treecheck" => &["tree_map", "ends", "basepoint"],
        "fit-tree" => &["snapshot", "distances", "tolerance"],
        _ => return None,
    })
}

/// Parses and schema-checks a config for `command`.
pub fn parse(command: &str, text: &str) -> Result<RunConfig, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("malformed JSON: {e}"))?;
    let obj = value
        .as_object()
        .ok_or_else(|| "the config must be a JSON object".to_string())?;
    let extra = allowed_keys(command).ok_or_else(|| format!("unknown command {command:?}"))?;
    for key in obj.keys() {
        if !COMMON.contains(&key.as_str()) && !extra.contains(&key.as_str()) {
            return Err(format!("field {key:?} is not used by {command}"));
        }
    }
    let cfg: RunConfig = serde_json::from_value(value).map_err(|e| format!("invalid config: {e}"))?;
    if let Some(c) = &cfg.command {
        if c != command {
            return Err(format!("config is for {c:?}, not {command:?}"));
        }
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn order(&self) -> usize {
        self.quadrature_order.unwrap_or(DEFAULT_ORDER)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn solver(&self) -> SolverOptions {
        self.solver.unwrap_or_default()
    }

    /// The search spec with the run seed.
    pub fn search(&self) -> SearchSpec {
        let mut s = self.search.clone().unwrap_or_default();
        s.seed = self.seed();
        s
    }

    pub fn map(&self, base: &Path) -> Result<RationalMap, String> {
        self.map
            .as_ref()
            .ok_or_else(|| "missing field \"map\"".to_string())?
            .load(base)
    }

    pub fn family(&self, base: &Path) -> Result<FamilySpec, String> {
        self.family
            .as_ref()
            .ok_or_else(|| "missing field \"family\"".to_string())?
            .load(base)
    }
}
