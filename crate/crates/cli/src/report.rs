//! Report envelope and CSV emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use cohomolib_core::ab::AB_CONVENTION;
use cohomolib_core::da::DA_CONVENTION;
use cohomolib_core::smalldiv::ROTATION_CONVENTION;
use serde::Serialize;
use serde_json::Value;

use crate::{write_text, CliError};

pub const TOOL: &str = "cohomolib";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const EQUATION: &str = "phi = u o f - u + c";
const SPLITTING: &str = "eigenvalues sorted by modulus; unit eigenvectors with first non-negligible coordinate \
     positive; duals are rows of the inverse eigenvector matrix";
const LIFTS: &str = "points reduced to [0,1)^d; f x evaluated as the reduction of M x";
const PCF: &str = "stable leg -sum_{k>=0} (phi(f^k y) - phi(f^k x)); unstable leg sum_{k>=1} \
     (phi(f^-k y) - phi(f^-k x)); each leg stops once its geometric tail bound is <= tol";
const LIVSIC: &str = "c = phi(0); u(x) = PCF along the SU path from 0 to x, so u(0) = 0";

/// Outcome of one subcommand before wrapping.
pub struct Outcome {
    pub report: Value,
    pub verdict: bool,
    /// Certified tolerances and tail bounds surfaced at top level.
    pub certified: Value,
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: u8,
}

#[derive(Debug, Serialize)]
pub struct Envelope {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    pub conventions: BTreeMap<&'static str, &'static str>,
    pub verdict: Option<bool>,
    pub certified: Value,
    pub error: Option<ErrorRecord>,
    pub report: Value,
}

pub fn conventions(command: &str) -> BTreeMap<&'static str, &'static str> {
    let mut c = BTreeMap::new();
    c.insert("equation", EQUATION);
    c.insert("splitting", SPLITTING);
    c.insert("lifts", LIFTS);
    c.insert("pcf", PCF);
    match command {
        "livsic" | "analyze" => {
            c.insert("transfer", LIVSIC);
        }
        "rotation" | "diophantine" => {
            c.insert("rotation", ROTATION_CONVENTION);
        }
        "da" => {
            c.insert("da", DA_CONVENTION);
            c.insert("rotation", ROTATION_CONVENTION);
        }
        "ab" => {
            c.insert("ab", AB_CONVENTION);
            c.insert("rotation", ROTATION_CONVENTION);
        }
        _ => {}
    }
    c
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Config(format!("serialization: {e}")))
}

pub fn emit(envelope: &Envelope, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(envelope).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    match out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Writes a CSV file with a header row; floats use shortest round-trip form.
pub fn write_csv<R>(path: &Path, header: &[&str], rows: R) -> Result<(), CliError>
where
    R: IntoIterator<Item = Vec<String>>,
{
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        let _ = writeln!(text, "{}", row.join(","));
    }
    write_text(path, &text)
}
