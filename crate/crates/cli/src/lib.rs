//! Batch runner for the `qlab` experiments.
//!
//! A run parses an [`ExperimentConfig`], validates it, computes every
//! output in memory and only then writes the files and a
//! [`RunManifest`] with per-file SHA-256 checksums. Payloads are a pure
//! function of the config and seed.

pub mod config;
pub mod experiments;
pub mod manifest;

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use thiserror::Error;

pub use config::{Experiment, ExperimentConfig, ExperimentId, ValidationReport};
pub use manifest::{FileEntry, RunManifest, MANIFEST_NAME};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QLAB_OUT_DIR";

/// Used when neither the command line, the config nor the environment
/// names an output directory.
pub const FALLBACK_OUT_DIR: &str = "qlab-out";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(ValidationReport),
    #[error("numerical failure: {0}")]
    Numerical(#[from] qlab::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Parse(_) => 2,
            RunError::Invalid(_) => 3,
            RunError::Numerical(_) => 4,
            RunError::Io(_) => 1,
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::Parse(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text)
}

/// Output directory precedence: `explicit`, then the config, then
/// [`OUT_DIR_ENV`], then [`FALLBACK_OUT_DIR`].
pub fn resolve_out_dir(explicit: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

/// Validates, executes and writes one experiment into `out_dir`.
///
/// Nothing is written unless validation and every computation succeed.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<(RunManifest, String), RunError> {
    let report = config.validate();
    if !report.is_empty() {
        return Err(RunError::Invalid(report));
    }
    let started_at = now();
    let outcome = experiments::execute(config)?;

    fs::create_dir_all(out_dir)?;
    let mut files = Vec::with_capacity(outcome.artifacts.len());
    for a in &outcome.artifacts {
        fs::write(out_dir.join(&a.name), &a.bytes)?;
        files.push(FileEntry {
            path: a.name.clone(),
            bytes: a.bytes.len() as u64,
            sha256: manifest::sha256_hex(&a.bytes),
        });
    }
    let manifest = RunManifest {
        artifact_version: format!("qlab {}", env!("CARGO_PKG_VERSION")),
        config: serde_json::to_value(config).expect("plain data serializes"),
        started_at,
        finished_at: now(),
        files,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("plain data serializes");
    text.push('\n');
    fs::write(out_dir.join(MANIFEST_NAME), text)?;
    Ok((manifest, outcome.headline))
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}
