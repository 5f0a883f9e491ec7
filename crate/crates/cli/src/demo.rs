//! Worked-example corpus: the cat map, the companion matrix of
//! `x^3 - 3x - 1`, golden and truncated-Liouville rotations, and the AB
//! examples, with `fixtures.json` listing the expected outcome of each run.
//!
//! Every run in the fixtures is driven by a config file in the corpus root,
//! so `cohomolib --config <dir>/<case>.toml --out r.json <command>` reproduces it.

use std::path::{Path, PathBuf};

use cohomolib_core::{BandLimitedFunction, IntMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{write_text, CliError};

pub const CAT: [[i64; 2]; 2] = [[2, 1], [1, 1]];
pub const COMPANION: [[i64; 3]; 3] = [[0, 1, 0], [0, 0, 1], [1, 3, 0]];
pub const CAT_DRIFT: f64 = 0.3;
pub const COMPANION_DRIFT: f64 = -0.2;
pub const AB_DRIFT: f64 = 0.25;
const LIOUVILLE_DEPTH: u32 = 3;

/// One expected value: `pointer` is a JSON pointer into the report envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub pointer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equals: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub name: String,
    pub command: String,
    /// Config file, relative to the corpus root.
    pub config: String,
    pub expected_exit: u8,
    pub bounds: Vec<Bound>,
}

impl Case {
    pub fn args(&self, root: &Path, out: &Path) -> Vec<String> {
        vec![
            "--config".into(),
            root.join(&self.config).display().to_string(),
            "--out".into(),
            out.display().to_string(),
            self.command.clone(),
        ]
    }
}

/// Checks one bound against an envelope; `Err` carries a readable mismatch.
pub fn check_bound(envelope: &serde_json::Value, b: &Bound) -> Result<(), String> {
    let v = envelope.pointer(&b.pointer).ok_or_else(|| format!("{} missing", b.pointer))?;
    if let Some(e) = &b.equals {
        if v != e {
            return Err(format!("{} = {v}, expected {e}", b.pointer));
        }
    }
    if b.max.is_some() || b.min.is_some() {
        let x = v.as_f64().ok_or_else(|| format!("{} = {v} is not a number", b.pointer))?;
        if let Some(m) = b.max {
            if !(x <= m) {
                return Err(format!("{} = {x:e} above {m:e}", b.pointer));
            }
        }
        if let Some(m) = b.min {
            if !(x >= m) {
                return Err(format!("{} = {x:e} below {m:e}", b.pointer));
            }
        }
    }
    Ok(())
}

fn max(pointer: &str, v: f64) -> Bound {
    Bound { pointer: pointer.into(), max: Some(v), min: None, equals: None }
}

fn min(pointer: &str, v: f64) -> Bound {
    Bound { pointer: pointer.into(), max: None, min: Some(v), equals: None }
}

fn equals(pointer: &str, v: serde_json::Value) -> Bound {
    Bound { pointer: pointer.into(), max: None, min: None, equals: Some(v) }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn function(dim: usize, terms: &[(&[i64], Complex64)]) -> BandLimitedFunction {
    BandLimitedFunction::from_half(dim, terms.iter().map(|(k, v)| (k.to_vec(), *v))).expect("corpus function")
}

pub fn cat_matrix() -> IntMatrix {
    IntMatrix::from_rows(&CAT).expect("cat map")
}

pub fn companion_matrix() -> IntMatrix {
    IntMatrix::from_rows(&COMPANION).expect("companion matrix")
}

/// Transfer function of the cat-map coboundary, cutoff 3.
pub fn cat_transfer() -> BandLimitedFunction {
    function(
        2,
        &[
            (&[1, 0], c(0.3, -0.1)),
            (&[0, 1], c(0.12, 0.0)),
            (&[1, -2], c(0.05, 0.2)),
            (&[2, 3], c(-0.1, 0.04)),
            (&[3, -1], c(0.02, -0.07)),
        ],
    )
}

/// Transfer function of the companion-matrix coboundary, cutoff 2.
pub fn companion_transfer() -> BandLimitedFunction {
    function(
        3,
        &[
            (&[1, 0, -1], c(0.1, 0.05)),
            (&[0, 1, 1], c(0.08, -0.03)),
            (&[2, -1, 0], c(-0.04, 0.02)),
            (&[0, 0, 1], c(0.06, 0.0)),
            (&[1, 2, -2], c(0.01, 0.03)),
        ],
    )
}

/// Transfer function on `T^2 x [0, 1)` for the AB coboundaries.
pub fn ab_transfer() -> BandLimitedFunction {
    function(3, &[(&[1, 0, 0], c(0.2, 0.1)), (&[0, 1, -1], c(-0.1, 0.05)), (&[1, -1, 2], c(0.04, -0.02))])
}

pub fn golden_psi() -> BandLimitedFunction {
    function(1, &[(&[1], c(0.5, 0.0)), (&[2], c(0.0, -0.25)), (&[5], c(0.1, 0.05))])
}

/// Mode at the denominator of the truncated Liouville number.
pub fn liouville_psi() -> BandLimitedFunction {
    let q = 10i64.pow((1..=LIOUVILLE_DEPTH).product());
    function(1, &[(&[1], c(0.5, 0.0)), (&[q], c(1e-3, 0.0))])
}

fn matrix_json<R: AsRef<[i64]>>(rows: &[R]) -> String {
    let rows: Vec<Vec<i64>> = rows.iter().map(|r| r.as_ref().to_vec()).collect();
    serde_json::to_string(&rows).expect("matrix") + "\n"
}

fn toml_case(command: &str, globals: &[(&str, String)], body: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in globals {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s.push_str(&format!("\n[{command}]\n"));
    for (k, v) in body {
        s.push_str(&format!("{k} = {v}\n"));
    }
    s
}

fn q(s: &str) -> String {
    format!("\"{s}\"")
}

/// The corpus as `(relative path, contents)` pairs, in a fixed order.
pub fn corpus() -> Result<Vec<(String, String)>, CliError> {
    let cat = cat_matrix();
    let companion = companion_matrix();
    let cat_phi = BandLimitedFunction::coboundary(&cat_transfer(), &cat, CAT_DRIFT)?;
    let companion_phi = BandLimitedFunction::coboundary(&companion_transfer(), &companion, COMPANION_DRIFT)?;
    let fiber_constant = function(3, &[(&[0, 0, 1], c(0.5, 0.0)), (&[0, 0, 2], c(0.0, -0.25))]);

    let mut files = vec![
        ("cat.json".to_string(), matrix_json(&CAT)),
        ("companion.json".to_string(), matrix_json(&COMPANION)),
        ("identity2.json".to_string(), matrix_json(&[[1i64, 0], [0, 1]])),
        ("cat_u.json".to_string(), cat_transfer().to_json()),
        ("cat_coboundary.json".to_string(), cat_phi.to_json()),
        ("cat_generic.json".to_string(), BandLimitedFunction::cosine(&[1, 0], 1.0).to_json()),
        ("companion_u.json".to_string(), companion_transfer().to_json()),
        ("companion_coboundary.json".to_string(), companion_phi.to_json()),
        ("golden_psi.json".to_string(), golden_psi().to_json()),
        ("psi3.json".to_string(), function(1, &[(&[1], c(0.5, 0.0)), (&[3], c(0.2, 0.1))]).to_json()),
        ("liouville_psi.json".to_string(), liouville_psi().to_json()),
        ("ab_u.json".to_string(), ab_transfer().to_json()),
        ("ab_fiber_constant.json".to_string(), fiber_constant.to_json()),
    ];

    let globals = vec![("workers", "0".to_string()), ("seed", "0".to_string())];
    let mut cases = Vec::new();
    let mut add = |name: &str, command: &str, body: Vec<(&str, String)>, exit: u8, bounds: Vec<Bound>| {
        let config = format!("{name}.toml");
        files.push((config.clone(), toml_case(command, &globals, &body)));
        cases.push(Case { name: name.into(), command: command.into(), config, expected_exit: exit, bounds });
    };

    add(
        "analyze_cat_coboundary",
        "analyze",
        vec![("matrix", q("cat.json")), ("phi", q("cat_coboundary.json")), ("max_period", "10".into())],
        0,
        vec![
            equals("/report/counts_agree", true.into()),
            equals("/report/periodic_counts/9/det_oracle", 15125.into()),
            max("/report/observable/length2_max_pcf", 2e-9),
            max("/report/observable/periodic_spread", 1e-10),
        ],
    );
    add(
        "analyze_cat_generic",
        "analyze",
        vec![("matrix", q("cat.json")), ("phi", q("cat_generic.json")), ("max_period", "10".into())],
        0,
        vec![
            equals("/report/observable/consistent", true.into()),
            min("/report/observable/length2_max_pcf", 1e-3),
            min("/report/observable/periodic_spread", 1e-3),
        ],
    );
    add(
        "pcf_cat_generic",
        "pcf",
        vec![("matrix", q("cat.json")), ("phi", q("cat_generic.json"))],
        2,
        vec![equals("/verdict", false.into()), min("/report/trivial_pcf/max_abs", 1e-2)],
    );
    add(
        "livsic_cat",
        "livsic",
        vec![
            ("matrix", q("cat.json")),
            ("phi", q("cat_coboundary.json")),
            ("reference", q("cat_u.json")),
            ("grid", "256".into()),
            ("tol", "1e-9".into()),
        ],
        0,
        vec![
            max("/report/solver/residual_sup", 1e-8),
            max("/report/recovery/sup", 1e-8),
            max("/report/solver/pcf_path_gap", 1e-8),
            equals("/report/solver/c", CAT_DRIFT.into()),
        ],
    );
    add(
        "rotation_golden",
        "rotation",
        vec![("alpha", q("golden")), ("psi", q("golden_psi.json"))],
        0,
        vec![equals("/report/solution/residual_ok", true.into()), max("/certified/telescoping_max", 1e-10)],
    );
    add(
        "rotation_third",
        "rotation",
        vec![("alpha", q("1/3")), ("psi", q("psi3.json"))],
        2,
        vec![equals("/error/kind", "hypothesis".into())],
    );
    add(
        "rotation_liouville",
        "rotation",
        vec![("alpha", q(&format!("liouville({LIOUVILLE_DEPTH})"))), ("psi", q("liouville_psi.json"))],
        2,
        vec![equals("/error/kind", "hypothesis".into())],
    );
    add(
        "diophantine_golden",
        "diophantine",
        vec![("alpha", q("(sqrt(5)-1)/2"))],
        0,
        vec![equals("/report/profile/cf/5", 1.into()), min("/report/arnold/total", 1.0)],
    );
    add(
        "diophantine_liouville",
        "diophantine",
        vec![("alpha", q(&format!("liouville({LIOUVILLE_DEPTH})")))],
        2,
        vec![equals("/error/kind", "hypothesis".into())],
    );
    add(
        "da_companion",
        "da",
        vec![
            ("matrix", q("companion.json")),
            ("phi", q("companion_coboundary.json")),
            ("reference", q("companion_u.json")),
            ("grid", "32".into()),
            ("band", "64".into()),
        ],
        0,
        vec![
            max("/report/da/solver/residual_sup", 1e-6),
            max("/report/recovery/sup", 1e-6),
            equals("/report/da/checks_ok", true.into()),
            equals("/report/da/growth/sublinear", true.into()),
        ],
    );
    add(
        "ab_fiber_constant",
        "ab",
        vec![
            ("a", q("cat.json")),
            ("b", q("identity2.json")),
            ("alpha", q("golden")),
            ("phi", q("ab_fiber_constant.json")),
        ],
        0,
        vec![max("/report/ab/leaf_reduction_defect", 1e-12), max("/report/ab/solver/residual_sup", 1e-10)],
    );
    add(
        "ab_identity_coboundary",
        "ab",
        vec![
            ("a", q("cat.json")),
            ("b", q("identity2.json")),
            ("alpha", q("golden")),
            ("coboundary_of", q("ab_u.json")),
            ("drift", AB_DRIFT.to_string()),
        ],
        0,
        vec![max("/report/ab/solver/residual_sup", 1e-6), max("/report/recovery/sup", 1e-6)],
    );
    add(
        "ab_glued_b_equals_a",
        "ab",
        vec![
            ("a", q("cat.json")),
            ("b", q("cat.json")),
            ("alpha", q("golden")),
            ("coboundary_of", q("ab_u.json")),
            ("grid", "8".into()),
            ("gluing_tol", "1e-5".into()),
        ],
        0,
        vec![max("/report/ab/gluing/max_residual", 1e-5), max("/report/ab/solver/residual_sup", 1e-6)],
    );
    add(
        "ab_rational",
        "ab",
        vec![
            ("a", q("cat.json")),
            ("b", q("identity2.json")),
            ("alpha", q("1/2")),
            ("phi", q("ab_fiber_constant.json")),
        ],
        2,
        vec![equals("/error/kind", "hypothesis".into())],
    );

    let fixtures = serde_json::to_string_pretty(&cases).map_err(|e| CliError::Config(e.to_string()))? + "\n";
    files.push(("fixtures.json".to_string(), fixtures));
    Ok(files)
}

pub fn load_fixtures(root: &Path) -> Result<Vec<Case>, CliError> {
    let text = crate::read_text(&root.join("fixtures.json"))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("fixtures.json: {e}")))
}

pub fn write_corpus(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for (name, text) in corpus()? {
        let path = dir.join(name);
        write_text(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic() {
        assert_eq!(corpus().unwrap(), corpus().unwrap());
    }

    #[test]
    fn configs_reference_existing_files() {
        let files = corpus().unwrap();
        let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
        for (name, text) in &files {
            if !name.ends_with(".toml") {
                continue;
            }
            let table: toml::Table = toml::from_str(text).unwrap();
            for section in table.values().filter_map(|v| v.as_table()) {
                for v in section.values().filter_map(|v| v.as_str()).filter(|s| s.ends_with(".json")) {
                    assert!(names.contains(&v), "{name} references missing {v}");
                }
            }
        }
    }

    #[test]
    fn bounds_check_pointers() {
        let env = serde_json::json!({ "a": { "b": 1e-9 }, "ok": true });
        assert!(check_bound(&env, &max("/a/b", 1e-8)).is_ok());
        assert!(check_bound(&env, &min("/a/b", 1e-8)).is_err());
        assert!(check_bound(&env, &equals("/ok", true.into())).is_ok());
        assert!(check_bound(&env, &max("/missing", 1.0)).is_err());
    }
}
