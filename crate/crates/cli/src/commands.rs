//! Subcommand runners.

use std::path::{Path, PathBuf};

use cohomolib_core::ab::{build_ab, solve_ab, ABSettings, GluedFunction, MbObservable};
use cohomolib_core::da::{solve_da, DaSettings};
use cohomolib_core::livsic::{periodic_data, periodic_equivalence_experiment, LivsicSolver};
use cohomolib_core::pcf::{pair_pcf, trivial_pcf_test, PcfSettings, TorusDynamics, DEFAULT_TOL};
use cohomolib_core::smalldiv::{
    arnold_series, diophantine_profile, parse_alpha, rationality_scan, solve_rotation, telescoping_defect,
    DEFAULT_RESONANCE_THRESHOLD,
};
use cohomolib_core::torus::{periodic_points_exact, spectral_splitting, SplittingClass, DEFAULT_POINT_CAP};
use cohomolib_core::{Error, GridFunction, Workers};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    merge_global, merge_section, positive, require, AbArgs, AnalyzeArgs, Cli, Command, ConfigFile, DaArgs,
    DiophantineArgs, LivsicArgs, PcfArgs, RotationArgs,
};
use crate::report::{conventions, emit, to_value, write_csv, Envelope, ErrorRecord, Outcome, TOOL, VERSION};
use crate::{demo, load_function, load_matrix, write_text, CliError};

/// Residual allowance of the Livšic grid solve, in units of `tol`.
pub const LIVSIC_RESIDUAL_FACTOR: f64 = 10.0;
const TELESCOPING_PHASES: [f64; 4] = [0.0, 0.25, 0.5, 0.75];
const DEFAULT_TAUS: [f64; 3] = [0.5, 1.0, 2.0];

struct Ctx {
    workers: Workers,
    seed: u64,
}

pub fn dispatch(cli: Cli) -> Result<u8, CliError> {
    let file = cli.global.config.as_deref().map(ConfigFile::load).transpose()?;
    let global = merge_global(file.as_ref(), &cli.global)?;
    let ctx = Ctx { workers: Workers(global.workers.unwrap_or(0)), seed: global.seed.unwrap_or(0) };
    let name = cli.command.name();

    macro_rules! prepare {
        ($flags:expr, $fill:expr) => {{
            let mut a = merge_section(file.as_ref(), name, $flags)?;
            $fill(&mut a);
            a
        }};
    }

    let (options, outcome) = match &cli.command {
        Command::Demo(flags) => {
            let a = merge_section(file.as_ref(), name, flags)?;
            let dir = a.out_dir.unwrap_or_else(|| PathBuf::from("demo"));
            let written = demo::write_corpus(&dir)?;
            println!("wrote {} files to {}", written.len(), dir.display());
            return Ok(0);
        }
        Command::Analyze(flags) => {
            let a: AnalyzeArgs = prepare!(flags, fill_analyze);
            (to_value(&a)?, analyze(&a, &ctx))
        }
        Command::Pcf(flags) => {
            let a: PcfArgs = prepare!(flags, fill_pcf);
            (to_value(&a)?, pcf(&a, &ctx))
        }
        Command::Livsic(flags) => {
            let a: LivsicArgs = prepare!(flags, fill_livsic);
            (to_value(&a)?, livsic(&a, &ctx))
        }
        Command::Rotation(flags) => {
            let a: RotationArgs = prepare!(flags, fill_rotation);
            (to_value(&a)?, rotation(&a))
        }
        Command::Diophantine(flags) => {
            let a: DiophantineArgs = prepare!(flags, fill_diophantine);
            (to_value(&a)?, diophantine(&a))
        }
        Command::Da(flags) => {
            let a: DaArgs = prepare!(flags, fill_da);
            (to_value(&a)?, da(&a, &ctx))
        }
        Command::Ab(flags) => {
            let a: AbArgs = prepare!(flags, fill_ab);
            (to_value(&a)?, ab(&a, &ctx))
        }
    };

    let config = json!({ "workers": ctx.workers.0, "seed": ctx.seed, "options": options });
    let mut envelope = Envelope {
        tool: TOOL,
        version: VERSION,
        command: name,
        config,
        conventions: conventions(name),
        verdict: None,
        certified: Value::Null,
        error: None,
        report: Value::Null,
    };
    let code = match outcome {
        Ok(o) => {
            envelope.verdict = Some(o.verdict);
            envelope.certified = o.certified;
            envelope.report = o.report;
            if o.verdict {
                0
            } else {
                eprintln!("verdict: false");
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            envelope.error = Some(ErrorRecord { kind: e.kind(), message: e.to_string(), exit_code: code });
            code
        }
    };
    emit(&envelope, global.out.as_deref())?;
    Ok(code)
}

fn fill_analyze(a: &mut AnalyzeArgs) {
    a.max_period.get_or_insert(6);
    a.m_range.get_or_insert(3);
    a.tol.get_or_insert(DEFAULT_TOL);
}

fn fill_pcf(a: &mut PcfArgs) {
    a.samples.get_or_insert(16);
    a.tol.get_or_insert(DEFAULT_TOL);
}

fn fill_livsic(a: &mut LivsicArgs) {
    a.grid.get_or_insert(256);
    a.tol.get_or_insert(DEFAULT_TOL);
    a.samples.get_or_insert(16);
}

fn fill_rotation(a: &mut RotationArgs) {
    a.threshold.get_or_insert(DEFAULT_RESONANCE_THRESHOLD);
    a.q_max.get_or_insert(10_000);
}

fn fill_diophantine(a: &mut DiophantineArgs) {
    a.q_max.get_or_insert(10_000);
    a.taus.get_or_insert_with(|| DEFAULT_TAUS.to_vec());
    a.epsilon.get_or_insert(0.5);
    a.l_max.get_or_insert(100_000);
    a.depth.get_or_insert(40);
}

fn fill_da(a: &mut DaArgs) {
    let d = DaSettings::default();
    a.grid.get_or_insert(d.grid_n);
    a.band.get_or_insert(d.band);
    a.tol.get_or_insert(d.pcf.tol);
    a.check_tol.get_or_insert(d.check_tol);
    a.samples.get_or_insert(d.probe_samples);
}

fn fill_ab(a: &mut AbArgs) {
    let d = ABSettings::default();
    a.grid.get_or_insert(d.grid_n);
    a.tol.get_or_insert(d.pcf.tol);
    a.threshold.get_or_insert(d.resonance_threshold);
    a.q_max.get_or_insert(d.q_max as u64);
    a.tau_bound.get_or_insert(d.tau_bound);
    a.gluing_samples.get_or_insert(d.gluing_samples);
    a.gluing_tol.get_or_insert(d.gluing_tol);
    a.samples.get_or_insert(d.probe_samples);
}

/// Distance to a known transfer function after the best constant shift.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Recovery {
    pub sup: f64,
    pub constant: f64,
}

pub fn recovery<F: Fn(&[f64]) -> f64>(u: &GridFunction, reference: F) -> Recovery {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..u.len() {
        let d = u.samples[i] - reference(&u.point(i));
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Recovery { sup: (hi - lo) / 2.0, constant: (hi + lo) / 2.0 }
}

fn grid_rows(u: &GridFunction) -> impl Iterator<Item = Vec<String>> + '_ {
    (0..u.len()).map(move |i| {
        let mut row: Vec<String> = u.multi_index(i).iter().map(|j| j.to_string()).collect();
        row.extend(u.point(i).iter().map(|x| x.to_string()));
        row.push(u.samples[i].to_string());
        row
    })
}

#[derive(Debug, Serialize)]
struct PeriodicCount {
    n: u32,
    det_oracle: u128,
    enumerated: Option<u128>,
    agrees: bool,
}

fn analyze(a: &AnalyzeArgs, _ctx: &Ctx) -> Result<Outcome, CliError> {
    let m = load_matrix(&require(&a.matrix, "matrix")?)?;
    let max_period = a.max_period.unwrap_or(6);
    let tol = positive(a.tol.unwrap_or(DEFAULT_TOL), "tol")?;
    let s = spectral_splitting(&m)?;
    let mut counts = Vec::new();
    if s.class != SplittingClass::NotHyperbolic {
        for n in 1..=max_period {
            let det_oracle = m.checked_pow(n)?.minus_identity().det().unsigned_abs();
            let enumerated = if det_oracle <= DEFAULT_POINT_CAP {
                Some(periodic_points_exact(&m, n, DEFAULT_POINT_CAP)?.len() as u128)
            } else {
                None
            };
            counts.push(PeriodicCount {
                n,
                det_oracle,
                enumerated,
                agrees: enumerated.is_none_or(|e| e == det_oracle),
            });
        }
    }
    let counts_ok = counts.iter().all(|c| c.agrees);
    let mut verdict = counts_ok;
    let mut certified = json!({ "tol": tol });
    let observable = match &a.phi {
        None => Value::Null,
        Some(p) => {
            let phi = load_function(p, m.dim())?;
            if s.class == SplittingClass::Anosov2d {
                let r = periodic_equivalence_experiment(
                    &phi,
                    &m,
                    a.m_range.unwrap_or(3),
                    max_period,
                    PcfSettings::with_tol(tol),
                )?;
                verdict &= r.consistent;
                certified["length2_tail_bound"] = json!(r.length2_tail_bound);
                to_value(&r)?
            } else {
                to_value(&periodic_data(&phi, &m, max_period)?)?
            }
        }
    };
    if let Some(path) = &a.csv {
        let rows = counts.iter().map(|c| {
            vec![c.n.to_string(), c.det_oracle.to_string(), c.enumerated.map_or(String::new(), |e| e.to_string())]
        });
        write_csv(path, &["n", "det_oracle", "enumerated"], rows)?;
    }
    let report = json!({
        "matrix": m.rows(),
        "det": m.det(),
        "trace": m.trace(),
        "splitting": to_value(&s)?,
        "periodic_counts": to_value(&counts)?,
        "counts_agree": counts_ok,
        "observable": observable,
    });
    Ok(Outcome { report, verdict, certified })
}

fn point_arg(p: &[f64], dim: usize, flag: &str) -> Result<Vec<f64>, CliError> {
    if p.len() != dim {
        return Err(CliError::Config(format!("--{flag} needs {dim} coordinates, got {}", p.len())));
    }
    Ok(p.to_vec())
}

fn pcf(a: &PcfArgs, ctx: &Ctx) -> Result<Outcome, CliError> {
    let m = load_matrix(&require(&a.matrix, "matrix")?)?;
    let phi = load_function(&require(&a.phi, "phi")?, m.dim())?;
    let tol = positive(a.tol.unwrap_or(DEFAULT_TOL), "tol")?;
    let settings = PcfSettings::with_tol(tol);
    let s = spectral_splitting(&m)?;
    let dynamics = TorusDynamics::new(&s)?;
    let pair = match (&a.from, &a.to) {
        (Some(x), Some(y)) => {
            let (x, y) = (point_arg(x, m.dim(), "from")?, point_arg(y, m.dim(), "to")?);
            Some(pair_pcf(&phi, &dynamics, &s, &x, &y, settings)?)
        }
        (None, None) => None,
        _ => return Err(CliError::Config("--from and --to must be given together".into())),
    };
    let probe = trivial_pcf_test(&phi, &dynamics, &s, a.samples.unwrap_or(16), ctx.seed, settings)?;
    let certified = json!({
        "tol": tol,
        "worst_cycle_tail_bound": probe.worst_tail_bound,
        "pair_tail_bound": pair.as_ref().map(|p| p.su.tail_bound.max(p.us.tail_bound)),
    });
    let verdict = probe.verdict;
    let report = json!({ "splitting": to_value(&s)?, "pair": to_value(&pair)?, "trivial_pcf": to_value(&probe)? });
    Ok(Outcome { report, verdict, certified })
}

fn livsic(a: &LivsicArgs, ctx: &Ctx) -> Result<Outcome, CliError> {
    let m = load_matrix(&require(&a.matrix, "matrix")?)?;
    let phi = load_function(&require(&a.phi, "phi")?, m.dim())?;
    let tol = positive(a.tol.unwrap_or(DEFAULT_TOL), "tol")?;
    let solver = LivsicSolver::new(&phi, &m, PcfSettings::with_tol(tol))?;
    let probe = solver.trivial_pcf(a.samples.unwrap_or(16), ctx.seed)?;
    let mut rep = solver.solve_grid(a.grid.unwrap_or(256), ctx.workers)?;
    let probe_ok = probe.verdict;
    rep.trivial_pcf = Some(probe);
    let rec = match &a.reference {
        Some(p) => {
            let u0 = load_function(p, 2)?;
            Some(recovery(&rep.u, |x| u0.evaluate(x)))
        }
        None => None,
    };
    if let Some(path) = &a.csv {
        write_csv(path, &["i", "j", "x1", "x2", "u"], grid_rows(&rep.u))?;
    }
    let residual_limit = LIVSIC_RESIDUAL_FACTOR * tol;
    let verdict = probe_ok && rep.residual_sup <= residual_limit;
    let certified = json!({
        "tol": tol,
        "max_tail_bound": rep.max_tail_bound,
        "pcf_path_gap": rep.pcf_path_gap,
        "residual_limit": residual_limit,
    });
    let report = json!({ "solver": to_value(&rep)?, "residual_limit": residual_limit, "recovery": to_value(&rec)? });
    Ok(Outcome { report, verdict, certified })
}

#[derive(Debug, Serialize)]
struct TelescopingRow {
    q: i128,
    defect: f64,
}

fn rotation(a: &RotationArgs) -> Result<Outcome, CliError> {
    let alpha = parse_alpha(&require(&a.alpha, "alpha")?)?;
    let psi = load_function(&require(&a.psi, "psi")?, 1)?;
    let threshold = positive(a.threshold.unwrap_or(DEFAULT_RESONANCE_THRESHOLD), "threshold")?;
    let q_max = a.q_max.unwrap_or(10_000) as i128;
    let r = solve_rotation(&psi, &alpha, threshold)?;
    let (profile, telescoping) = if alpha.is_rational() {
        (None, Vec::new())
    } else {
        let profile = diophantine_profile(&alpha, q_max, &DEFAULT_TAUS)?;
        let mut rows = Vec::new();
        for q in profile.denominators().filter(|&q| q <= q_max) {
            let mut defect = 0.0f64;
            for t in TELESCOPING_PHASES {
                defect = defect.max(telescoping_defect(&r, &psi, &alpha, q, t)?);
            }
            rows.push(TelescopingRow { q, defect });
        }
        (Some(profile), rows)
    };
    if let Some(path) = &a.csv {
        let rows = r.modes.iter().map(|m| {
            vec![
                m.l.to_string(),
                m.psi.re.to_string(),
                m.psi.im.to_string(),
                m.denominator.norm().to_string(),
                m.w.re.to_string(),
                m.w.im.to_string(),
            ]
        });
        write_csv(path, &["l", "psi_re", "psi_im", "denominator_abs", "w_re", "w_im"], rows)?;
    }
    let certified = json!({
        "resonance_threshold": threshold,
        "min_denominator": r.min_denominator,
        "residual_limit": r.residual_limit,
        "telescoping_max": telescoping.iter().fold(0.0f64, |m, t| m.max(t.defect)),
    });
    let verdict = r.residual_ok;
    let report = json!({
        "solution": to_value(&r)?,
        "diophantine_profile": to_value(&profile)?,
        "telescoping": to_value(&telescoping)?,
    });
    Ok(Outcome { report, verdict, certified })
}

fn diophantine(a: &DiophantineArgs) -> Result<Outcome, CliError> {
    let alpha = parse_alpha(&require(&a.alpha, "alpha")?)?;
    let depth = rationality_scan(&alpha, a.depth.unwrap_or(40))?;
    let q_max = a.q_max.unwrap_or(10_000) as i128;
    let taus = a.taus.clone().unwrap_or_else(|| DEFAULT_TAUS.to_vec());
    let profile = diophantine_profile(&alpha, q_max, &taus)?;
    let epsilon = positive(a.epsilon.unwrap_or(0.5), "epsilon")?;
    let arnold = arnold_series(&alpha, epsilon, a.l_max.unwrap_or(100_000))?;
    if let Some(path) = &a.csv {
        let mut rows = Vec::new();
        for (n, &(p, q)) in profile.convergents.iter().enumerate() {
            let d = alpha.dist(q)?;
            rows.push(vec![n.to_string(), p.to_string(), q.to_string(), d.to_string(), (q as f64 * d).to_string()]);
        }
        write_csv(path, &["n", "p", "q", "dist", "q_dist"], rows)?;
    }
    let certified = json!({ "q_max": q_max, "rationality_depth": depth });
    let report = json!({
        "alpha": alpha.to_f64(),
        "alpha_exact": alpha.to_string(),
        "rationality_depth": depth,
        "profile": to_value(&profile)?,
        "arnold": to_value(&arnold)?,
    });
    Ok(Outcome { report, verdict: true, certified })
}

fn dump_json<T: Serialize>(dir: &Path, name: &str, v: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Config(e.to_string()))?;
    write_text(&dir.join(name), &text)
}

fn da(a: &DaArgs, ctx: &Ctx) -> Result<Outcome, CliError> {
    let m = load_matrix(&require(&a.matrix, "matrix")?)?;
    if m.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: m.dim() }.into());
    }
    let phi = load_function(&require(&a.phi, "phi")?, 3)?;
    let d = DaSettings::default();
    let settings = DaSettings {
        grid_n: a.grid.unwrap_or(d.grid_n),
        band: a.band.unwrap_or(d.band),
        pcf: PcfSettings::with_tol(positive(a.tol.unwrap_or(d.pcf.tol), "tol")?),
        check_tol: positive(a.check_tol.unwrap_or(d.check_tol), "check_tol")?,
        probe_samples: a.samples.unwrap_or(d.probe_samples),
        seed: ctx.seed,
        ..d
    };
    let rep = solve_da(&m, &phi, &settings, ctx.workers)?;
    if let (Some(dir), Some(art)) = (&a.dump_dir, &rep.artifacts) {
        dump_json(dir, "chart.json", &rep.chart)?;
        dump_json(dir, "cocycle_tables.json", &art.cocycle_tables)?;
        dump_json(dir, "v.json", &art.periodization.v_table)?;
        dump_json(
            dir,
            "psibar.json",
            &json!({
                "tables": to_value(&art.periodization.psibar_tables)?,
                "periodicity": to_value(&art.periodization.periodicity)?,
            }),
        )?;
        write_text(&dir.join("wbar.json"), &art.wbar.to_json())?;
        dump_json(dir, "w.json", &art.w_table)?;
    }
    let rec = match &a.reference {
        Some(p) => {
            let u0 = load_function(p, 3)?;
            Some(recovery(&rep.solver.u, |x| u0.evaluate(x)))
        }
        None => None,
    };
    if let Some(path) = &a.csv {
        write_csv(path, &["i", "j", "k", "x1", "x2", "x3", "u"], grid_rows(&rep.solver.u))?;
    }
    let probe_ok = rep.solver.trivial_pcf.as_ref().is_none_or(|p| p.verdict);
    let residual_ok = rep.solver.residual_sup <= settings.check_tol;
    let verdict = rep.checks_ok && probe_ok && residual_ok;
    let certified = json!({
        "tol": settings.pcf.tol,
        "check_tol": settings.check_tol,
        "max_tail_bound": rep.solver.max_tail_bound,
        "periodicity_limit": rep.periodicity.iter().fold(0.0f64, |m, p| m.max(p.limit)),
        "pcf_path_gap": rep.solver.pcf_path_gap,
    });
    let report = json!({
        "da": to_value(&rep)?,
        "settings": to_value(&settings)?,
        "residual_ok": residual_ok,
        "recovery": to_value(&rec)?,
    });
    Ok(Outcome { report, verdict, certified })
}

fn ab(a: &AbArgs, ctx: &Ctx) -> Result<Outcome, CliError> {
    let ma = load_matrix(&require(&a.a, "A")?)?;
    let mb = load_matrix(&require(&a.b, "B")?)?;
    let alpha = parse_alpha(&require(&a.alpha, "alpha")?)?;
    let sys = build_ab(&ma, &mb, alpha)?;
    let (phi, synthesized) = match (&a.phi, &a.coboundary_of) {
        (Some(p), None) => (MbObservable::glued(&sys, load_function(p, 3)?)?, None),
        (None, Some(p)) => {
            let u = load_function(p, 3)?;
            (MbObservable::coboundary(&sys, u.clone(), a.drift.unwrap_or(0.0))?, Some(u))
        }
        _ => return Err(CliError::Config("exactly one of --phi and --coboundary-of is required".into())),
    };
    let d = ABSettings::default();
    let settings = ABSettings {
        grid_n: a.grid.unwrap_or(d.grid_n),
        pcf: PcfSettings::with_tol(positive(a.tol.unwrap_or(d.pcf.tol), "tol")?),
        resonance_threshold: positive(a.threshold.unwrap_or(d.resonance_threshold), "threshold")?,
        q_max: a.q_max.map_or(d.q_max, |q| q as i128),
        tau_bound: positive(a.tau_bound.unwrap_or(d.tau_bound), "tau_bound")?,
        gluing_samples: a.gluing_samples.unwrap_or(d.gluing_samples),
        gluing_tol: positive(a.gluing_tol.unwrap_or(d.gluing_tol), "gluing_tol")?,
        probe_samples: a.samples.unwrap_or(d.probe_samples),
        seed: ctx.seed,
    };
    let rep = solve_ab(&sys, &phi, &settings, ctx.workers)?;
    let reference = match &a.reference {
        Some(p) => Some(load_function(p, 3)?),
        None => synthesized,
    };
    let rec = match reference {
        Some(h) => {
            let u0 = GluedFunction::new(&sys, h)?;
            Some(recovery(&rep.solver.u, |x| u0.eval_point(x)))
        }
        None => None,
    };
    if let Some(path) = &a.csv {
        write_csv(path, &["i", "j", "k", "x1", "x2", "t", "u"], grid_rows(&rep.solver.u))?;
    }
    let probe_ok = rep.solver.trivial_pcf.as_ref().is_none_or(|p| p.verdict);
    let verdict = rep.gluing.ok && rep.leaf_solution.residual_ok && probe_ok;
    let certified = json!({
        "tol": settings.pcf.tol,
        "gluing_tol": settings.gluing_tol,
        "max_tail_bound": rep.solver.max_tail_bound,
        "pcf_path_gap": rep.solver.pcf_path_gap,
        "resonance_threshold": settings.resonance_threshold,
    });
    let report = json!({ "ab": to_value(&rep)?, "settings": to_value(&settings)?, "recovery": to_value(&rec)? });
    Ok(Outcome { report, verdict, certified })
}
