//! Acceptance suite. Each test prints one `PASS`/`FAIL` line straight to
//! stderr (bypassing output capture) and then asserts its criterion.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use cohomolib_core::ab::{build_ab, solve_ab, ABSettings, GluedFunction, MbObservable};
use cohomolib_core::da::{build_center_chart, solve_da, CenterCocycle, DaSettings};
use cohomolib_core::livsic::{periodic_equivalence_experiment, solve_livsic};
use cohomolib_core::pcf::{
    homoclinic_cycles_at, pcf_sequence, two_leg_connect, AccessibleSequence, Leaf, LeafPath, LegOrder, PcfSettings,
    TorusDynamics,
};
use cohomolib_core::smalldiv::{
    arnold_series, diophantine_profile, solve_rotation, telescoping_defect, Alpha, DEFAULT_RESONANCE_THRESHOLD,
};
use cohomolib_core::torus::{periodic_points_exact, spectral_splitting, Line, SpectralSplitting, DEFAULT_POINT_CAP};
use cohomolib_core::{BandLimitedFunction, Error, GridFunction, IntMatrix, Workers};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

struct Verdict {
    name: &'static str,
    checks: Vec<(String, bool)>,
    start: Instant,
    budget: Duration,
}

impl Verdict {
    fn new(name: &'static str, budget_secs: u64) -> Self {
        Verdict { name, checks: Vec::new(), start: Instant::now(), budget: Duration::from_secs(budget_secs) }
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.checks.push((label.into(), ok));
    }

    fn finish(mut self) {
        let elapsed = self.start.elapsed();
        self.check(
            format!("runtime {:.1}s < {}s", elapsed.as_secs_f64(), self.budget.as_secs()),
            elapsed < self.budget,
        );
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
        let status = if failed.is_empty() { "PASS" } else { "FAIL" };
        let detail: Vec<String> =
            self.checks.iter().map(|(l, ok)| format!("{}{l}", if *ok { "" } else { "!! " })).collect();
        let mut err = std::io::stderr();
        let _ = writeln!(err, "{status} {}: {}", self.name, detail.join("; "));
        assert!(failed.is_empty(), "{} failed: {failed:?}", self.name);
    }
}

fn cat() -> IntMatrix {
    IntMatrix::from_rows(&[[2, 1], [1, 1]]).unwrap()
}

fn companion() -> IntMatrix {
    IntMatrix::from_rows(&[[0, 1, 0], [0, 0, 1], [1, 3, 0]]).unwrap()
}

/// Random trigonometric polynomial with `coefficient_l1` equal to `norm`.
fn random_poly(rng: &mut ChaCha8Rng, dim: usize, cutoff: i64, modes: usize, norm: f64) -> BandLimitedFunction {
    let mut terms = Vec::new();
    while terms.len() < modes {
        let k: Vec<i64> = (0..dim).map(|_| rng.gen_range(-cutoff..=cutoff)).collect();
        let first = k.iter().find(|&&x| x != 0);
        if first.is_none_or(|&x| x < 0) {
            continue;
        }
        terms.push((k, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
    }
    let f = BandLimitedFunction::from_half(dim, terms).unwrap();
    f.scale(norm / f.coefficient_l1())
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen::<f64>()).collect()
}

/// Lifted rectangle `s, u, -s, -u` closed exactly at its base.
fn rectangle(s: &SpectralSplitting, p: &[f64], a: f64, b: f64) -> AccessibleSequence {
    let vs = s.eigenvector(Line::Stable).unwrap();
    let vu = s.eigenvector(Line::Unstable).unwrap();
    let ds: Vec<f64> = vs.iter().map(|x| a * x).collect();
    let du: Vec<f64> = vu.iter().map(|x| b * x).collect();
    let l1 = LeafPath::new(Leaf::Stable, p.to_vec(), ds.clone());
    let l2 = LeafPath::new(Leaf::Unstable, l1.end(), du.clone());
    let l3 = LeafPath::new(Leaf::Stable, l2.end(), ds.iter().map(|x| -x).collect());
    let mut l4 = LeafPath::new(Leaf::Unstable, l3.end(), du.iter().map(|x| -x).collect());
    l4.delta = p.iter().zip(&l4.origin).map(|(a, b)| a - b).collect();
    AccessibleSequence { legs: vec![l1, l2, l3, l4], is_cycle: true, lifted: true }
}

/// Accessible sequence through random waypoints, each pair joined by a
/// two-leg path in a random order.
fn random_sequence(rng: &mut ChaCha8Rng, s: &SpectralSplitting) -> AccessibleSequence {
    let hops = rng.gen_range(1..=3);
    let mut seq = AccessibleSequence::path(Vec::new());
    let mut x = random_point(rng, 2);
    for _ in 0..hops {
        let y: Vec<f64> = x.iter().map(|c| c + rng.gen_range(-1.5..1.5)).collect();
        let order = if rng.gen::<bool>() { LegOrder::Su } else { LegOrder::Us };
        seq = seq.concat(&two_leg_connect(s, &x, &y, order).unwrap());
        x = y;
    }
    seq
}

fn sup_recovery(u: &GridFunction, exact: impl Fn(&[f64]) -> f64) -> f64 {
    let d: Vec<f64> = (0..u.len()).map(|i| u.samples[i] - exact(&u.point(i))).collect();
    let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / 2.0
}

#[test]
fn pcf_algebra() {
    let _g = serial();
    let mut v = Verdict::new("pcf algebra on the cat map", 30);
    let s = spectral_splitting(&cat()).unwrap();
    let d = TorusDynamics::new(&s).unwrap();
    let settings = PcfSettings::with_tol(1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut cycle_max, mut shift_max, mut additivity_max) = (0.0f64, 0.0f64, 0.0f64);
    let mut structural = true;
    for i in 0..1000 {
        let norm = rng.gen_range(0.1..1.0);
        let u0 = random_poly(&mut rng, 2, 3, 5, norm);
        let c0 = rng.gen_range(-1.0..1.0);
        let phi = BandLimitedFunction::coboundary(&u0, &cat(), c0).unwrap();
        let cycle = if i % 2 == 0 {
            let base = random_point(&mut rng, 2);
            let all = homoclinic_cycles_at(&s, rng.gen_range(1..=3), &base).unwrap();
            all[rng.gen_range(0..all.len())].cycle.clone()
        } else {
            let p = random_point(&mut rng, 2);
            rectangle(&s, &p, rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        };
        cycle_max = cycle_max.max(pcf_sequence(&phi, &d, &cycle, settings).unwrap().value.abs());

        let generic = random_poly(&mut rng, 2, 3, 5, 1.0);
        let seq = random_sequence(&mut rng, &s);
        let (x0, xk) = (seq.start().unwrap(), seq.end().unwrap());
        let before = pcf_sequence(&generic, &d, &seq, settings).unwrap().value;
        let after = pcf_sequence(&generic, &d, &seq.image(&d), settings).unwrap().value;
        let expected = generic.evaluate(&xk) - generic.evaluate(&x0);
        shift_max = shift_max.max((after - before - expected).abs());

        let cut = rng.gen_range(1..seq.legs.len());
        let (left, right) =
            (AccessibleSequence::path(seq.legs[..cut].to_vec()), AccessibleSequence::path(seq.legs[cut..].to_vec()));
        let whole = pcf_sequence(&generic, &d, &seq, settings).unwrap();
        let a = pcf_sequence(&generic, &d, &left, settings).unwrap();
        let b = pcf_sequence(&generic, &d, &right, settings).unwrap();
        let joined: Vec<_> = a.legs.iter().chain(&b.legs).cloned().collect();
        let refold = joined.iter().fold(0.0, |acc, l| acc + l.value);
        structural &= whole.legs == joined && whole.value == refold;
        additivity_max = additivity_max.max((whole.value - a.value - b.value).abs());
    }
    v.check(format!("coboundary cycle max |PCF| {cycle_max:.2e} <= 2e-9"), cycle_max <= 2e-9);
    v.check(format!("shift identity defect {shift_max:.2e} <= 4e-9"), shift_max <= 4e-9);
    v.check(format!("concatenation exact (leg values bitwise, split-sum rounding {additivity_max:.1e})"), structural);
    v.finish();
}

#[test]
fn periodic_data_against_homoclinic_functionals() {
    let _g = serial();
    let mut v = Verdict::new("homoclinic functionals vs periodic data", 120);
    let m = cat();
    let mut counts_ok = true;
    for n in 1..=10u32 {
        let oracle = m.checked_pow(n).unwrap().minus_identity().det().unsigned_abs();
        let found = periodic_points_exact(&m, n, DEFAULT_POINT_CAP).unwrap().len() as u128;
        counts_ok &= found == oracle;
    }
    v.check("periodic point counts equal |det(A^n - I)| for n <= 10", counts_ok);
    let settings = PcfSettings::with_tol(1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut cob_pcf, mut cob_spread) = (0.0f64, 0.0f64);
    let (mut gen_pcf, mut gen_spread) = (f64::INFINITY, f64::INFINITY);
    let mut counterexamples = 0;
    for i in 0..40 {
        let norm = rng.gen_range(0.1..1.0);
        let u0 = random_poly(&mut rng, 2, 3, 5, norm);
        let phi = if i < 20 { BandLimitedFunction::coboundary(&u0, &m, rng.gen_range(-1.0..1.0)).unwrap() } else { u0 };
        let r = periodic_equivalence_experiment(&phi, &m, 3, 10, settings).unwrap();
        if !r.consistent {
            counterexamples += 1;
        }
        if i < 20 {
            cob_pcf = cob_pcf.max(r.length2_max_pcf);
            cob_spread = cob_spread.max(r.periodic_spread);
        } else {
            gen_pcf = gen_pcf.min(r.length2_max_pcf);
            gen_spread = gen_spread.min(r.periodic_spread);
        }
    }
    v.check(format!("coboundaries: length-2 PCF {cob_pcf:.2e} <= 2e-9"), cob_pcf <= 2e-9);
    v.check(format!("coboundaries: periodic spread {cob_spread:.2e} <= 1e-10"), cob_spread <= 1e-10);
    v.check(
        format!("generic: min length-2 PCF {gen_pcf:.2e} and min spread {gen_spread:.2e} both positive"),
        gen_pcf > 2e-9 && gen_spread > 1e-10,
    );
    v.check(format!("{counterexamples} counterexamples"), counterexamples == 0);
    v.finish();
}

#[test]
fn livsic_round_trip() {
    let _g = serial();
    let mut v = Verdict::new("Livsic round trip on a 256^2 grid", 120);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut residual, mut rec) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let norm = rng.gen_range(0.1..1.0);
        let u0 = random_poly(&mut rng, 2, 3, 6, norm);
        let phi = BandLimitedFunction::coboundary(&u0, &cat(), rng.gen_range(-1.0..1.0)).unwrap();
        let r = solve_livsic(&phi, &cat(), 256, PcfSettings::with_tol(1e-9), Workers(0)).unwrap();
        residual = residual.max(r.residual_sup);
        rec = rec.max(sup_recovery(&r.u, |x| u0.evaluate(x)));
    }
    v.check(format!("residual_sup {residual:.2e} <= 1e-8"), residual <= 1e-8);
    v.check(format!("recovery {rec:.2e} <= 1e-8"), rec <= 1e-8);
    v.finish();
}

#[test]
fn rotation_solver() {
    let _g = serial();
    let mut v = Verdict::new("circle rotation solver", 30);
    let golden = Alpha::golden();
    let a = (5f64.sqrt() - 1.0) / 2.0;
    let psi = BandLimitedFunction::cosine(&[1], 1.0);
    let r = solve_rotation(&psi, &golden, DEFAULT_RESONANCE_THRESHOLD).unwrap();
    let amp = 1.0 / (2.0 * (std::f64::consts::PI * a).sin());
    let closed = (0..1000)
        .map(|j| {
            let t = j as f64 / 1000.0;
            (r.w.evaluate(&[t]) - amp * (2.0 * std::f64::consts::PI * (t - a / 2.0)).sin()).abs()
        })
        .fold(0.0f64, f64::max);
    v.check(format!("single harmonic vs closed form {closed:.1e} <= 1e-14"), closed <= 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let multi = random_poly(&mut rng, 1, 12, 8, 1.0);
    let rm = solve_rotation(&multi, &golden, DEFAULT_RESONANCE_THRESHOLD).unwrap();
    let profile = diophantine_profile(&golden, 10_000, &[1.0]).unwrap();
    let mut tele = 0.0f64;
    for q in profile.denominators().filter(|&q| q <= 10_000) {
        for _ in 0..8 {
            tele = tele.max(telescoping_defect(&rm, &multi, &golden, q, rng.gen()).unwrap());
        }
    }
    v.check(format!("telescoping over convergents q <= 1e4: {tele:.2e} <= 1e-10"), tele <= 1e-10);

    let mut resonant = true;
    for n in [3u32, 4] {
        let alpha = Alpha::liouville(n).unwrap();
        let adversarial = BandLimitedFunction::from_half(
            1,
            [(vec![1], Complex64::new(0.5, 0.0)), (vec![1_000_000], Complex64::new(1e-3, 0.0))],
        )
        .unwrap();
        let err = solve_rotation(&adversarial, &alpha, DEFAULT_RESONANCE_THRESHOLD).unwrap_err();
        resonant &= matches!(err, Error::Resonance { l: 1_000_000, .. });
    }
    v.check("truncated Liouville numbers with a mode at 10^6 raise Resonance", resonant);

    let series = arnold_series(&golden, 0.5, 100_000).unwrap();
    v.check(
        format!("Arnold series last-decade increment {:.2}% of total < 1%", 100.0 * series.tail_ratio),
        series.tail_ratio < 0.01,
    );
    v.finish();
}

#[test]
fn da_pipeline() {
    let _g = serial();
    let mut v = Verdict::new("DA pipeline on the x^3 - 3x - 1 companion matrix", 600);
    let m = companion();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let u0 = random_poly(&mut rng, 3, 2, 8, 1.0);
    let phi = BandLimitedFunction::coboundary(&u0, &m, rng.gen_range(-1.0..1.0)).unwrap();

    let chart = build_center_chart(&m).unwrap();
    let cocycle = CenterCocycle::new(&chart, &phi, PcfSettings::with_tol(1e-9)).unwrap();
    let mut worst_ratio = 0.0f64;
    let mut within = true;
    for _ in 0..1000 {
        let a: [i64; 3] = std::array::from_fn(|_| rng.gen_range(-3..=3));
        let b: [i64; 3] = std::array::from_fn(|_| rng.gen_range(-3..=3));
        let s = rng.gen_range(-chart.s_radius..chart.s_radius);
        let sum = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
        let whole = cocycle.psi(&sum, s).unwrap();
        let first = cocycle.psi(&a, s).unwrap();
        let second = cocycle.psi(&b, chart.translate(&a, s)).unwrap();
        let tail = whole.tail_bound.max(first.tail_bound).max(second.tail_bound);
        let residual = (whole.value - first.value - second.value).abs();
        within &= residual <= 6.0 * tail;
        worst_ratio = worst_ratio.max(residual / (6.0 * tail));
    }
    v.check(format!("cocycle residual <= 6x tails on 1e3 triples (worst ratio {worst_ratio:.2})"), within);

    let settings = DaSettings { grid_n: 32, band: 64, ..DaSettings::default() };
    let r = solve_da(&m, &phi, &settings, Workers(0)).unwrap();
    let periodicity = r.periodicity.iter().map(|p| p.residual).fold(0.0f64, f64::max);
    v.check(format!("Psi-bar periodicity {periodicity:.2e} <= 1e-8"), periodicity <= 1e-8);
    let c = r.periodic_cocycle.max_abs_c();
    v.check(format!("|c(e_j)| {c:.2e} <= 1e-6"), c <= 1e-6);
    let add = r.periodic_cocycle.additivity_residual;
    v.check(format!("additivity {add:.2e} <= 1e-6"), add <= 1e-6);
    let residual = r.solver.residual_sup;
    v.check(format!("round trip residual_sup {residual:.2e} <= 1e-6"), residual <= 1e-6);
    let rec = sup_recovery(&r.solver.u, |x| u0.evaluate(x));
    v.check(format!("recovery {rec:.2e} <= 1e-6"), rec <= 1e-6);
    v.check(
        format!("max_s |Psi(n, s)| sublinear in |n| <= 16 (power fit {:.3})", r.growth.power_exponent),
        r.growth.sublinear && r.growth.power_exponent < 1.0,
    );
    v.finish();
}

fn cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_cohomolib")).args(args).output().unwrap().status.code().unwrap_or(-1)
}

#[test]
fn ab_pipeline() {
    let _g = serial();
    let mut v = Verdict::new("AB pipeline on the glued mapping torus", 180);
    let golden = Alpha::golden();

    let flat = build_ab(&cat(), &IntMatrix::identity(2), golden).unwrap();
    let fiber = BandLimitedFunction::from_half(
        3,
        [(vec![0, 0, 1], Complex64::new(0.5, 0.0)), (vec![0, 0, 3], Complex64::new(0.1, -0.2))],
    )
    .unwrap();
    let r = solve_ab(&flat, &MbObservable::glued(&flat, fiber.clone()).unwrap(), &ABSettings::default(), Workers(0))
        .unwrap();
    let circle =
        BandLimitedFunction::from_half(1, [(vec![1], Complex64::new(0.5, 0.0)), (vec![3], Complex64::new(0.1, -0.2))])
            .unwrap();
    let direct = solve_rotation(&circle, &golden, DEFAULT_RESONANCE_THRESHOLD).unwrap();
    let off_leaf = (0..r.solver.u.len())
        .map(|i| (r.solver.u.samples[i] - direct.w.evaluate(&[r.solver.u.point(i)[2]])).abs())
        .fold(0.0f64, f64::max);
    let exact = r.leaf_solution.w == direct.w && r.c == direct.c && r.leaf_reduction_defect == 0.0 && off_leaf == 0.0;
    v.check("fiber-constant observable reduces exactly to the rotation solve", exact);

    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let h = random_poly(&mut rng, 3, 2, 6, 0.5);
    let drift = rng.gen_range(-1.0..1.0);
    let r = solve_ab(
        &flat,
        &MbObservable::coboundary(&flat, h.clone(), drift).unwrap(),
        &ABSettings::default(),
        Workers(0),
    )
    .unwrap();
    let rec = sup_recovery(&r.solver.u, |x| h.evaluate(x));
    v.check(format!("B = I coboundary residual {:.2e} <= 1e-6", r.solver.residual_sup), r.solver.residual_sup <= 1e-6);
    v.check(format!("B = I recovery {rec:.2e} <= 1e-6"), rec <= 1e-6);

    let twisted = build_ab(&cat(), &cat(), golden).unwrap();
    let settings = ABSettings { grid_n: 8, gluing_tol: 1e-5, ..ABSettings::default() };
    let r = solve_ab(&twisted, &MbObservable::coboundary(&twisted, h.clone(), 0.0).unwrap(), &settings, Workers(0))
        .unwrap();
    let glued = GluedFunction::new(&twisted, h).unwrap();
    let rec = sup_recovery(&r.solver.u, |x| glued.eval_point(x));
    v.check(
        format!("B = A gluing residual {:.2e} <= 1e-5 over {} samples", r.gluing.max_residual, r.gluing.samples),
        r.gluing.max_residual <= 1e-5,
    );
    v.check(format!("B = A recovery {rec:.2e} <= 1e-6"), rec <= 1e-6);

    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("a.json"), "[[2,1],[1,1]]").unwrap();
    std::fs::write(d.join("b.json"), "[[1,0],[0,1]]").unwrap();
    std::fs::write(d.join("phi.json"), BandLimitedFunction::cosine(&[0, 0, 2], 1.0).to_json()).unwrap();
    let p = |n: &str| d.join(n).display().to_string();
    let code = cli(&["ab", "--A", &p("a.json"), "--B", &p("b.json"), "--alpha", "1/2", "--phi", &p("phi.json")]);
    v.check(format!("rational alpha rejected with exit code {code}"), code == 2);
    v.finish();
}

fn numeric_fields(path: &Path) -> (Value, Value) {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    (v["report"].clone(), v["certified"].clone())
}

#[test]
fn determinism_across_worker_counts() {
    let _g = serial();
    let mut v = Verdict::new("determinism across worker counts", 600);
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(cli(&["demo", "--out-dir", d.to_str().unwrap()]), 0);
    let cases = cohomolib_cli::demo::load_fixtures(d).unwrap();
    let mut identical = 0;
    for case in &cases {
        let mut runs = Vec::new();
        for workers in ["1", "3"] {
            let out = d.join(format!("{}_{workers}.json", case.name));
            let mut args = case.args(d, &out);
            args.splice(0..0, ["--workers".to_string(), workers.to_string()]);
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            let code = cli(&refs);
            runs.push((code, numeric_fields(&out)));
        }
        let same = runs[0] == runs[1];
        if same {
            identical += 1;
        }
        v.check(format!("{} identical", case.name), same);
    }
    let six = (|| -> Option<bool> {
        let phi = BandLimitedFunction::coboundary(
            &BandLimitedFunction::cosine(&[1, 2], 0.3).add(&BandLimitedFunction::sine(&[2, -1], 0.2)),
            &cat(),
            0.1,
        )
        .ok()?;
        let a = solve_livsic(&phi, &cat(), 64, PcfSettings::default(), Workers(1)).ok()?;
        let b = solve_livsic(&phi, &cat(), 64, PcfSettings::default(), Workers(4)).ok()?;
        Some(a.u.samples == b.u.samples && a.residual_sup == b.residual_sup)
    })()
    .unwrap_or(false);
    v.check(format!("{identical}/{} corpus runs; library grid solve bitwise equal", cases.len()), six);
    v.finish();
}
