//! Output assembly: CSV with `#` metadata lines, or JSON with a `meta`
//! block. Everything is rendered into memory and written once.

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub struct Meta {
    pub command: String,
    pub config_json: String,
    pub config_sha256: String,
    pub order: usize,
    pub seed: u64,
}

impl Meta {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        let config_json = serde_json::to_string(cfg).expect("config serializes");
        let digest = Sha256::digest(config_json.as_bytes());
        let config_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Self {
            command: command.to_string(),
            config_json,
            config_sha256,
            order: cfg.order(),
            seed: cfg.seed(),
        }
    }

    fn lines(&self) -> Vec<String> {
        vec![
            format!("# barytree {}", self.command),
            format!("# config_sha256: {}", self.config_sha256),
            format!("# config: {}", self.config_json),
            format!("# quadrature_order: {}", self.order),
            format!("# seed: {}", self.seed),
        ]
    }
}

pub struct Table {
    pub notes: Vec<(String, String)>,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            notes: Vec::new(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self, meta: &Meta) -> Vec<u8> {
        let mut out = String::new();
        for l in meta.lines() {
            out.push_str(&l);
            out.push('\n');
        }
        for (k, v) in &self.notes {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut w = csv::Writer::from_writer(out.into_bytes());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

pub fn render_json<T: Serialize>(meta: &Meta, result: &T) -> Vec<u8> {
    let config: serde_json::Value = serde_json::from_str(&meta.config_json).expect("own JSON");
    let doc = json!({
        "meta": {
            "command": meta.command,
            "config_sha256": meta.config_sha256,
            "config": config,
            "quadrature_order": meta.order,
            "seed": meta.seed,
        },
        "result": result,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable result");
    s.push('\n');
    s.into_bytes()
}

/// Shortest round-trip text for a float; infinities as `inf`/`-inf`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
