//! `barytree`: runs the experiments of the barytree library from JSON
//! configs. Exit status 0 on success, 1 on a configuration error, 2 on a
//! numeric failure (including partial results).

mod commands;
mod config;
mod output;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Failure;

#[derive(Parser)]
#[command(name = "barytree", version, about = "Barycentric extensions of rational maps and their tree limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config quadrature order.
    #[arg(long)]
    quadrature_order: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel scans.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// E f at one point, as JSON.
    Extend(Common),
    /// Operator norms of the derivative over sampled points, as CSV.
    Lipscan(Common),
    /// Belt volume and F_y spectrum of the recentered map, as JSON.
    Belt(Common),
    /// The radial defect of E(z²) on a grid, as CSV.
    Delta(Common),
    /// Preimages of the origin (or a rescaled snapshot), as CSV.
    Preimages(Common),
    /// Rescaling radii or translation estimates along a family, as CSV.
    Family(Common),
    /// The gap between E(f^N) and (E f)^N, as CSV.
    Naturality(Common),
    /// Validates a branched cover of trees, as JSON.
    Treecheck(Common),
    /// Fits a tree to a snapshot or distance table, as JSON.
    FitTree(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Extend(c) => ("extend", c),
            Command::Lipscan(c) => ("lipscan", c),
            Command::Belt(c) => ("belt", c),
            Command::Delta(c) => ("delta", c),
            Command::Preimages(c) => ("preimages", c),
            Command::Family(c) => ("family", c),
            Command::Naturality(c) => ("naturality", c),
            Command::Treecheck(c) => ("treecheck", c),
            Command::FitTree(c) => ("fit-tree", c),
        }
    }
}

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("barytree: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("BARYTREE_LOG", "warn")).init();
    let cli = Cli::parse();
    let (name, common) = cli.command.parts();

    let text = match fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => return fail(1, &format!("{}: {e}", common.config.display())),
    };
    let mut cfg = match config::parse(name, &text) {
        Ok(c) => c,
        Err(e) => return fail(1, &e),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.quadrature_order.is_some() {
        cfg.quadrature_order = common.quadrature_order;
    }
    let out = common.out.clone().or_else(|| cfg.out.take());
    cfg.out = None;
    cfg.command = Some(name.to_string());
    let base = common
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = common.workers {
        if w == 0 {
            return fail(1, "--workers must be positive");
        }
        pool = pool.num_threads(w);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return fail(1, &format!("thread pool: {e}")),
    };
    log::info!("running {name} at quadrature order {}", cfg.order());
    let result = pool.install(|| commands::run(name, &cfg, &base));

    match result {
        Err(Failure::Config(m)) => fail(1, &m),
        Err(Failure::Numeric(m)) => fail(2, &m),
        Ok(outcome) => {
            let written = match &out {
                Some(p) => fs::write(p, &outcome.bytes).map_err(|e| format!("{}: {e}", p.display())),
                None => std::io::stdout()
                    .write_all(&outcome.bytes)
                    .map_err(|e| e.to_string()),
            };
            if let Err(e) = written {
                return fail(1, &e);
            }
            if let Some(s) = &outcome.summary {
                eprintln!("{s}");
            }
            if outcome.partial {
                fail(2, "some sub-runs failed; partial results written")
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
