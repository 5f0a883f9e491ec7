//! Command-line options and TOML config merging.
//!
//! A config file holds the global options at top level and one table per
//! subcommand:
//!
//! ```toml
//! workers = 2
//! seed = 7
//!
//! [livsic]
//! matrix = "cat.json"
//! phi = "cat_coboundary.json"
//! grid = 128
//! ```
//!
//! Relative paths in the file are resolved against the file's directory.
//! Flags given on the command line override the file.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

const PATH_KEYS: [&str; 11] =
    ["matrix", "phi", "psi", "a", "b", "out", "csv", "dump_dir", "reference", "out_dir", "coboundary_of"];

#[derive(Debug, Parser)]
#[command(name = "cohomolib", version, about = "Cohomological equations over linear Anosov, DA and AB systems on tori")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalArgs {
    /// TOML config file; flags override its values
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 lets the runtime decide, 1 is sequential)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed for sampled probe cycles
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report path (stdout when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral splitting, periodic point counts and (with --phi) periodic data against homoclinic functionals.
    /// CSV columns: n,det_oracle,enumerated
    Analyze(AnalyzeArgs),
    /// Trivial-PCF probe and optional point-pair functional.
    Pcf(PcfArgs),
    /// Livsic solver on T^2. CSV columns: i,j,x1,x2,u
    Livsic(LivsicArgs),
    /// Circle rotation equation w(t + alpha) - w(t) = psi(t) + c.
    /// CSV columns: l,psi_re,psi_im,denominator_abs,w_re,w_im
    Rotation(RotationArgs),
    /// Continued fraction, empirical Diophantine constants and the Arnold series.
    /// CSV columns: n,p,q,dist,q_dist
    Diophantine(DiophantineArgs),
    /// Center-cocycle pipeline for a partially hyperbolic automorphism of T^3.
    /// CSV columns: i,j,k,x1,x2,x3,u
    Da(DaArgs),
    /// Skew product (x, t) -> (Ax, t + alpha) on the B-glued mapping torus.
    /// CSV columns: i,j,k,x1,x2,t,u
    Ab(AbArgs),
    /// Writes the worked-example corpus with expected-report fixtures.
    Demo(DemoArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze(_) => "analyze",
            Command::Pcf(_) => "pcf",
            Command::Livsic(_) => "livsic",
            Command::Rotation(_) => "rotation",
            Command::Diophantine(_) => "diophantine",
            Command::Da(_) => "da",
            Command::Ab(_) => "ab",
            Command::Demo(_) => "demo",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeArgs {
    /// Integer matrix as a JSON array of rows
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Observable as band-limited JSON
    #[arg(long)]
    pub phi: Option<PathBuf>,
    /// Largest period for point counts and periodic data
    #[arg(long)]
    pub max_period: Option<u32>,
    /// Homoclinic range |m|_inf for the length-2 functionals
    #[arg(long)]
    pub m_range: Option<i64>,
    /// PCF truncation tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// CSV output path
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcfArgs {
    /// Integer matrix as a JSON array of rows
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Observable as band-limited JSON
    #[arg(long)]
    pub phi: Option<PathBuf>,
    /// Start point of a point-pair functional, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub from: Option<Vec<f64>>,
    /// End point of a point-pair functional, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub to: Option<Vec<f64>>,
    /// Number of sampled probe cycles
    #[arg(long)]
    pub samples: Option<usize>,
    /// PCF truncation tolerance
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LivsicArgs {
    /// Integer matrix as a JSON array of rows
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Observable as band-limited JSON
    #[arg(long)]
    pub phi: Option<PathBuf>,
    /// Grid points per axis
    #[arg(long)]
    pub grid: Option<usize>,
    /// PCF truncation tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Number of sampled probe cycles
    #[arg(long)]
    pub samples: Option<usize>,
    /// Known transfer function; reports the sup distance after constant matching
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// CSV output path
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotationArgs {
    /// Decimal, p/q, quadratic surd such as (sqrt(5)-1)/2, golden, or liouville(n)
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Circle function as band-limited JSON
    #[arg(long)]
    pub psi: Option<PathBuf>,
    /// Small-divisor resonance threshold
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Largest continued-fraction denominator examined
    #[arg(long)]
    pub q_max: Option<u64>,
    /// CSV output path
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiophantineArgs {
    /// Decimal, p/q, quadratic surd such as (sqrt(5)-1)/2, golden, or liouville(n)
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Largest continued-fraction denominator examined
    #[arg(long)]
    pub q_max: Option<u64>,
    /// Exponents for the empirical Diophantine constants, comma separated
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    /// Arnold series exponent offset
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Arnold series length
    #[arg(long)]
    pub l_max: Option<u64>,
    /// Continued-fraction depth of the rationality scan
    #[arg(long)]
    pub depth: Option<usize>,
    /// CSV output path
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaArgs {
    /// Integer matrix as a JSON array of rows
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Observable as band-limited JSON
    #[arg(long)]
    pub phi: Option<PathBuf>,
    /// Grid points per axis
    #[arg(long)]
    pub grid: Option<usize>,
    /// Fourier cutoff of the periodic cocycle solve
    #[arg(long)]
    pub band: Option<usize>,
    /// PCF truncation tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Tolerance for the DA consistency checks and the residual verdict
    #[arg(long)]
    pub check_tol: Option<f64>,
    /// Number of sampled probe cycles
    #[arg(long)]
    pub samples: Option<usize>,
    /// Known transfer function; reports the sup distance after constant matching
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// CSV output path
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Directory for chart, cocycle tables, v, Psi-bar and w-bar JSON
    #[arg(long)]
    pub dump_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbArgs {
    /// Anosov matrix acting on the fiber
    #[arg(long = "A")]
    pub a: Option<PathBuf>,
    /// Gluing matrix commuting with A
    #[arg(long = "B")]
    pub b: Option<PathBuf>,
    /// Decimal, p/q, quadratic surd such as (sqrt(5)-1)/2, golden, or liouville(n)
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Function on T^3 in (x1, x2, t); glued along B before solving
    #[arg(long, conflicts_with = "coboundary_of")]
    pub phi: Option<PathBuf>,
    /// Synthesizes phi = u o A_alpha - u + drift from this u, glued along B
    #[arg(long)]
    pub coboundary_of: Option<PathBuf>,
    /// Constant added to the synthesized coboundary
    #[arg(long, allow_hyphen_values = true)]
    pub drift: Option<f64>,
    /// Grid points per axis
    #[arg(long)]
    pub grid: Option<usize>,
    /// PCF truncation tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Small-divisor resonance threshold
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Largest continued-fraction denominator examined
    #[arg(long)]
    pub q_max: Option<u64>,
    /// Largest Diophantine exponent accepted
    #[arg(long)]
    pub tau_bound: Option<f64>,
    /// Sample count for the gluing check
    #[arg(long)]
    pub gluing_samples: Option<usize>,
    /// Tolerance of the gluing check
    #[arg(long)]
    pub gluing_tol: Option<f64>,
    /// Number of sampled probe cycles
    #[arg(long)]
    pub samples: Option<usize>,
    /// Known transfer function; reports the sup distance after constant matching
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// CSV output path
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoArgs {
    /// Directory for the corpus
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Parsed config file: global keys and per-subcommand tables.
pub struct ConfigFile {
    root: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = crate::read_text(path)?;
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut root = match serde_json::to_value(table) {
            Ok(Value::Object(m)) => m,
            _ => return Err(CliError::Config(format!("{}: not a table", path.display()))),
        };
        let dir = path.parent().unwrap_or(Path::new("."));
        resolve_paths(&mut root, dir);
        for v in root.values_mut() {
            if let Value::Object(t) = v {
                resolve_paths(t, dir);
            }
        }
        Ok(ConfigFile { root })
    }

    fn globals(&self) -> Map<String, Value> {
        self.root.iter().filter(|(_, v)| !v.is_object()).map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    fn section(&self, name: &str) -> Result<Map<String, Value>, CliError> {
        match self.root.get(name) {
            None => Ok(Map::new()),
            Some(Value::Object(t)) => Ok(t.clone()),
            Some(_) => Err(CliError::Config(format!("[{name}] must be a table"))),
        }
    }
}

fn resolve_paths(t: &mut Map<String, Value>, dir: &Path) {
    for key in PATH_KEYS {
        if let Some(Value::String(s)) = t.get(key) {
            let p = Path::new(s);
            if p.is_relative() {
                let joined = dir.join(p).to_string_lossy().into_owned();
                t.insert(key.to_string(), Value::String(joined));
            }
        }
    }
}

/// File values overlaid by every flag that was given.
fn overlay<T: Serialize + DeserializeOwned>(
    mut base: Map<String, Value>,
    flags: &T,
    what: &str,
) -> Result<T, CliError> {
    let flags = serde_json::to_value(flags).map_err(|e| CliError::Config(e.to_string()))?;
    if let Value::Object(f) = flags {
        for (k, v) in f {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

pub fn merge_global(file: Option<&ConfigFile>, flags: &GlobalArgs) -> Result<GlobalArgs, CliError> {
    let base = file.map(ConfigFile::globals).unwrap_or_default();
    overlay(base, flags, "global options")
}

pub fn merge_section<T: Serialize + DeserializeOwned>(
    file: Option<&ConfigFile>,
    name: &str,
    flags: &T,
) -> Result<T, CliError> {
    let base = match file {
        Some(f) => f.section(name)?,
        None => Map::new(),
    };
    overlay(base, flags, &format!("[{name}]"))
}

pub fn require<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, CliError> {
    v.clone().ok_or_else(|| CliError::Config(format!("missing --{flag}")))
}

pub fn positive(v: f64, name: &str) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "workers = 3\n[livsic]\nmatrix = \"m.json\"\ngrid = 64\n").unwrap();
        let file = ConfigFile::load(&path).unwrap();
        let flags = LivsicArgs { grid: Some(32), ..Default::default() };
        let merged = merge_section(Some(&file), "livsic", &flags).unwrap();
        assert_eq!(merged.grid, Some(32));
        assert_eq!(merged.matrix, Some(dir.path().join("m.json")));
        let g = merge_global(Some(&file), &GlobalArgs::default()).unwrap();
        assert_eq!(g.workers, Some(3));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "[livsic]\ngird = 64\n").unwrap();
        let file = ConfigFile::load(&path).unwrap();
        assert!(merge_section(Some(&file), "livsic", &LivsicArgs::default()).is_err());
    }
}
