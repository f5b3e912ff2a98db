//! Config-driven runner for dynamical-symmetry discovery and dynamics.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 theorem violation, 1 output I/O failure.

pub mod commands;
pub mod config;
pub mod report;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use commands::Outcome;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("theorem violation: {0}")]
    Theorem(String),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Theorem(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<dynsym_core::Error> for CliError {
    fn from(e: dynsym_core::Error) -> Self {
        use dynsym_core::Error as E;
        match e {
            E::TheoremViolation(msg) => CliError::Theorem(msg),
            E::InvalidParameter(_)
            | E::InvalidDimension(_)
            | E::DimensionCapExceeded { .. }
            | E::SiteOutOfRange { .. }
            | E::NotNormalized(_)
            | E::DegenerateWindow(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

/// Output directory: the command line wins over the config.
pub fn output_dir(cli: Option<&Path>, config: &config::ExperimentConfig) -> Result<PathBuf, CliError> {
    cli.map(Path::to_path_buf)
        .or_else(|| config.outputs.directory.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set outputs.directory".into()))
}

/// Writes every artifact, then the timing sidecar.
pub fn write_outcome(dir: &Path, outcome: &Outcome) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for (name, bytes) in &outcome.artifacts.files {
        std::fs::write(dir.join(name), bytes).map_err(io)?;
    }
    let mut timing = serde_json::to_vec_pretty(&outcome.timing).map_err(|e| CliError::Io(e.to_string()))?;
    timing.push(b'\n');
    std::fs::write(dir.join("timing.json"), timing).map_err(io)
}
