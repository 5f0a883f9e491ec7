//! Front end for `cohomolib`: option merging, pipeline dispatch and report
//! emission.
//!
//! Exit codes: 0 when the run succeeds with every verdict true, 2 when the
//! input falls outside a hypothesis (resonance, nontrivial periodic cycle
//! functional, non-commuting pair, or a false verdict), 1 for I/O and
//! validation errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod demo;
pub mod report;

use std::fmt;
use std::path::Path;

use cohomolib_core::{BandLimitedFunction, Error, IntMatrix};

pub use config::Cli;

#[derive(Debug)]
pub enum CliError {
    Io { path: String, detail: String },
    Config(String),
    Core(Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, detail } => write!(f, "{path}: {detail}"),
            CliError::Config(msg) => write!(f, "config: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_hypothesis_violation() => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Config(_) => "config",
            CliError::Core(e) if e.is_hypothesis_violation() => "hypothesis",
            CliError::Core(_) => "validation",
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_error(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), detail: e.to_string() }
}

pub fn load_matrix(path: &Path) -> Result<IntMatrix, CliError> {
    Ok(IntMatrix::from_json(&read_text(path)?)?)
}

/// Reads a function file; `dim` is the ambient dimension it must have.
pub fn load_function(path: &Path, dim: usize) -> Result<BandLimitedFunction, CliError> {
    let text = read_text(path)?;
    if let Some(d) = BandLimitedFunction::json_dim(&text)? {
        if d != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: d }.into());
        }
    }
    Ok(BandLimitedFunction::from_json(dim, &text)?)
}

/// Runs one invocation and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    match commands::dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
