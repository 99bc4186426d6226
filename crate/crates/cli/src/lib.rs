//! Config-driven runner for Kerr Ising model experiments.
//!
//! Every run writes CSV tables plus `manifest.json` into its output
//! directory. Column layouts are documented in `docs/csv_schema.md`.

// Negated comparisons reject NaN in config validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub use config::{ExperimentConfig, Kind, Overrides};
pub use experiments::{run_experiment, Output};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Model(#[from] kerr_ising_core::Error),
}

impl CliError {
    /// 2 for anything wrong with the request, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Model(kerr_ising_core::Error::EdgeList { .. }) => 2,
            CliError::Io { .. } | CliError::Model(_) => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub deterministic_reduce: bool,
}

#[derive(Debug)]
pub struct RunReport {
    pub out: PathBuf,
    pub files: Vec<PathBuf>,
    pub wall_time_s: f64,
}

/// Runs a resolved config and writes its tables and manifest.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport, CliError> {
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    let threads = pool.current_num_threads();
    let output = pool.install(|| run_experiment(cfg))?;
    let wall_time_s = clock.elapsed().as_secs_f64();

    std::fs::create_dir_all(&opts.out).map_err(|e| io_error(&opts.out, e))?;
    let mut files = Vec::new();
    for t in &output.tables {
        t.write(&opts.out)?;
        files.push(opts.out.join(&t.file));
    }
    let manifest = output::Manifest {
        tool: "kim",
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.kind().to_string(),
        seed: cfg.seed,
        threads,
        deterministic_reduce: opts.deterministic_reduce,
        config: cfg,
        outputs: output
            .tables
            .iter()
            .map(|t| output::OutputEntry {
                file: t.file.clone(),
                rows: t.rows.len(),
                columns: t.header.clone(),
            })
            .collect(),
        notes: output.notes,
        started_unix: started,
        wall_time_s,
    };
    let path = opts.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    std::fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))?;
    files.push(path);
    Ok(RunReport {
        out: opts.out.clone(),
        files,
        wall_time_s,
    })
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}
