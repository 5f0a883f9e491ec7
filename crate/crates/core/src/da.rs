//! Cohomological equation for a linear partially hyperbolic automorphism of
//! `T^3` with a one-dimensional center.
//!
//! The su-foliation projects each deck translate `x + n` of a center-line
//! point onto the center line at `T_n(x) = x + (n . alpha) v1`. The PCF from
//! `x + n` to `T_n(x)` is a cocycle `Psi` over this `Z^3` action; after
//! periodization by a bump it becomes 1-periodic and is solved by Fourier
//! series along one irrational translation. The transfer function on the
//! center line is then extended to `T^3` by PCF along su-leaves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::{BandLimitedFunction, GridFunction};
use crate::livsic::{holder_fit, FunctionRegularity, SolverReport, PATH_GAP_FACTOR};
use crate::par::{map_indexed, try_map_indexed, Workers};
use crate::pcf::{pcf_sequence, trivial_pcf_test, two_leg_connect, LegOrder, PcfSettings, PcfValue, TorusDynamics};
use crate::smalldiv::{
    diophantine_profile, rationality_scan, solve_rotation, Alpha, DiophantineProfile, RotationSolveReport,
    DEFAULT_RESONANCE_THRESHOLD,
};
use crate::torus::{norm, spectral_splitting, IntMatrix, Line, SpectralSplitting};

const PROJECTION_FLOOR: f64 = 1e-12;
const LEAKAGE_TOL: f64 = 1e-10;
const RATIONALITY_DEPTH: usize = 20;
const MINIMALITY_RANGE: i64 = 50;
const PROFILE_Q_MAX: i128 = 10_000;
const PROFILE_TAUS: [f64; 3] = [0.5, 1.0, 2.0];
const GROWTH_SCALES: [i64; 5] = [1, 2, 4, 8, 16];
const GROWTH_SAMPLES: usize = 64;
const TABLE_SAMPLES: usize = 257;
const CENTER_SAMPLES: usize = 256;
const DECK_SAMPLES: usize = 64;
const PERIODICITY_FACTOR: f64 = 8.0;

pub const DA_CONVENTION: &str = "phi = u o A - u + c, c = phi(0); chart s -> s v1 with v1 the center \
     projection of e1 along E^s + E^u; alpha_j = (center coefficient of e_j) / (center coefficient of e1); \
     Psi(n, s) = PCF from s v1 + n to (s + n . alpha) v1 along the SU path";

/// Partition-of-unity germ: `0` on `[0, 1/3]`, `1` on `[2/3, 1]`.
pub fn bump(x: f64) -> f64 {
    let g = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let (a, b) = (g(3.0 * x - 1.0), g(2.0 - 3.0 * x));
    a / (a + b)
}

#[derive(Debug, Clone, Serialize)]
pub struct CenterLineChart {
    pub matrix: IntMatrix,
    #[serde(skip)]
    pub splitting: SpectralSplitting,
    /// Signed center eigenvalue.
    pub lambda_c: f64,
    pub v_c: Vec<f64>,
    pub v1: Vec<f64>,
    pub alpha: [f64; 3],
    pub scale: f64,
    /// `max_j |proj_c(e_j) - alpha_j v1|`.
    pub projection_residual: f64,
    /// Chart coordinates of lifts in `[0,1)^3` lie in `[-s_radius, s_radius]`.
    pub s_radius: f64,
    /// Continued-fraction levels of `alpha_2`, `alpha_3` seen without termination.
    pub cf_depth: [usize; 2],
    /// Largest gap of `{n alpha_2 + m alpha_3 mod 1 : |n|, |m| <= 50}`.
    pub minimality_gap: f64,
}

impl CenterLineChart {
    pub fn point(&self, s: f64) -> [f64; 3] {
        [s * self.v1[0], s * self.v1[1], s * self.v1[2]]
    }

    /// Chart coordinate of `T_n(s)`.
    pub fn translate(&self, n: &[i64; 3], s: f64) -> f64 {
        s + self.shift(n)
    }

    pub fn shift(&self, n: &[i64; 3]) -> f64 {
        (0..3).map(|j| n[j] as f64 * self.alpha[j]).sum()
    }

    /// Chart coordinate of the su-projection of a lift onto the center line.
    pub fn coordinate(&self, x: &[f64]) -> f64 {
        (0..3).map(|j| x[j] * self.alpha[j]).sum()
    }
}

pub fn build_center_chart(m: &IntMatrix) -> Result<CenterLineChart> {
    let splitting = spectral_splitting(m)?;
    if !splitting.class.is_partially_hyperbolic() {
        return Err(Error::NotPartiallyHyperbolic);
    }
    let dual = splitting.dual(Line::Center).expect("center line").to_vec();
    let v_c = splitting.eigenvector(Line::Center).expect("center line").to_vec();
    let v1 = splitting.component(Line::Center, &[1.0, 0.0, 0.0]);
    let scale = norm(&v1);
    if scale < PROJECTION_FLOOR {
        return Err(Error::DegenerateProjection(scale));
    }
    let alpha = [1.0, dual[1] / dual[0], dual[2] / dual[0]];
    let mut projection_residual = 0.0f64;
    for (j, &a) in alpha.iter().enumerate() {
        let mut e = [0.0; 3];
        e[j] = 1.0;
        let p = splitting.component(Line::Center, &e);
        for (pi, vi) in p.iter().zip(&v1) {
            projection_residual = projection_residual.max((pi - a * vi).abs());
        }
    }
    let cf_depth = [
        rationality_scan(&Alpha::from_f64(alpha[1])?, RATIONALITY_DEPTH)?,
        rationality_scan(&Alpha::from_f64(alpha[2])?, RATIONALITY_DEPTH)?,
    ];
    Ok(CenterLineChart {
        matrix: m.clone(),
        lambda_c: splitting.eigenvalue(Line::Center).expect("center line"),
        v_c,
        v1,
        scale,
        projection_residual,
        s_radius: 1.0 + alpha.iter().map(|a| a.abs()).sum::<f64>(),
        cf_depth,
        minimality_gap: minimality_gap(alpha[1], alpha[2], MINIMALITY_RANGE),
        alpha,
        splitting,
    })
}

/// Largest circular gap of `{n a + m b mod 1 : |n|, |m| <= range}`.
pub fn minimality_gap(a: f64, b: f64, range: i64) -> f64 {
    let mut pts = Vec::new();
    for n in -range..=range {
        for m in -range..=range {
            let t = n as f64 * a + m as f64 * b;
            pts.push(t - t.floor());
        }
    }
    pts.sort_by(f64::total_cmp);
    let wrap = pts[0] + 1.0 - pts[pts.len() - 1];
    pts.windows(2).fold(wrap, |g, w| g.max(w[1] - w[0]))
}

/// A value assembled from several orbit sums, with the sum of their tail
/// bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CocycleValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

impl CocycleValue {
    fn add(self, other: Self, sign: f64) -> Self {
        CocycleValue {
            value: self.value + sign * other.value,
            tail_bound: self.tail_bound + other.tail_bound,
            terms: self.terms.max(other.terms),
        }
    }
}

impl From<PcfValue> for CocycleValue {
    fn from(p: PcfValue) -> Self {
        CocycleValue { value: p.value, tail_bound: p.tail_bound, terms: p.truncation_k }
    }
}

/// The cocycle `Psi` of an observable over the center-line action, with the
/// periodizing function `v`.
pub struct CenterCocycle<'a> {
    chart: &'a CenterLineChart,
    psi: &'a BandLimitedFunction,
    dynamics: TorusDynamics,
    settings: PcfSettings,
}

impl<'a> CenterCocycle<'a> {
    pub fn new(chart: &'a CenterLineChart, psi: &'a BandLimitedFunction, settings: PcfSettings) -> Result<Self> {
        if psi.dim() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: psi.dim() });
        }
        Ok(CenterCocycle { chart, psi, dynamics: TorusDynamics::new(&chart.splitting)?, settings })
    }

    pub fn chart(&self) -> &CenterLineChart {
        self.chart
    }

    pub fn dynamics(&self) -> &TorusDynamics {
        &self.dynamics
    }

    /// `Psi(n, s)`: PCF from `s v1 + n` to `T_n(s v1)`.
    pub fn psi(&self, n: &[i64; 3], s: f64) -> Result<CocycleValue> {
        if n.iter().all(|&k| k == 0) {
            return Ok(CocycleValue::default());
        }
        let x = self.chart.point(s);
        let from: Vec<f64> = (0..3).map(|j| x[j] + n[j] as f64).collect();
        let to = self.chart.point(self.chart.translate(n, s));
        let gap: Vec<f64> = to.iter().zip(&from).map(|(a, b)| a - b).collect();
        let leak = self.chart.splitting.coefficient(Line::Center, &gap).abs();
        let scale = n.iter().fold(1.0f64, |m, &k| m.max(k.abs() as f64));
        if leak > LEAKAGE_TOL * scale {
            return Err(Error::CenterLeakage(leak));
        }
        let path = two_leg_connect(&self.chart.splitting, &from, &to, LegOrder::Su)?;
        Ok(pcf_sequence(self.psi, &self.dynamics, &path, self.settings)?.into())
    }

    /// `v(s)`: `-b(s) Psi(e1, s - 1)` on `[0, 1)`, extended by
    /// `v(x + l) = v(x) - Psi(l e1, x)`.
    pub fn v(&self, s: f64) -> Result<CocycleValue> {
        let l = s.floor();
        let x = s - l;
        let b = bump(x);
        let mut out = CocycleValue::default();
        if b > 0.0 {
            let p = self.psi(&[1, 0, 0], x - 1.0)?;
            out = CocycleValue { value: -b * p.value, tail_bound: b * p.tail_bound, terms: p.terms };
        }
        if l != 0.0 {
            out = out.add(self.psi(&[l as i64, 0, 0], x)?, -1.0);
        }
        Ok(out)
    }

    /// `Psibar(n, s) = Psi(n, s) + v(T_n s) - v(s)`.
    pub fn psibar(&self, n: &[i64; 3], s: f64) -> Result<CocycleValue> {
        let p = self.psi(n, s)?;
        let vt = self.v(self.chart.translate(n, s))?;
        let v0 = self.v(s)?;
        Ok(p.add(vt, 1.0).add(v0, -1.0))
    }
}

/// Free-function form of [`CenterCocycle::psi`].
pub fn cocycle_psi(
    chart: &CenterLineChart,
    psi: &BandLimitedFunction,
    n: &[i64; 3],
    s: f64,
    tol: f64,
) -> Result<CocycleValue> {
    CenterCocycle::new(chart, psi, PcfSettings::with_tol(tol))?.psi(n, s)
}

/// Samples of one of the center-line functions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CocycleTable {
    pub n: [i64; 3],
    pub s: Vec<f64>,
    pub values: Vec<f64>,
    pub tail_bounds: Vec<f64>,
}

impl CocycleTable {
    fn build<F>(n: [i64; 3], s: Vec<f64>, workers: Workers, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<CocycleValue> + Sync + Send,
    {
        let vals = try_map_indexed(s.len(), workers, |i| f(s[i]))?;
        Ok(CocycleTable {
            n,
            values: vals.iter().map(|v| v.value).collect(),
            tail_bounds: vals.iter().map(|v| v.tail_bound).collect(),
            s,
        })
    }

    pub fn max_tail_bound(&self) -> f64 {
        self.tail_bounds.iter().fold(0.0, |m, &t| m.max(t))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicityCheck {
    pub n: [i64; 3],
    pub residual: f64,
    pub limit: f64,
}

/// Output of [`periodize`]: `v` over the chart range, and `Psibar(n, .)` on
/// the uniform grid of `[0, 1)` for the basis vectors and their pairwise sums.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Periodization {
    pub v_table: CocycleTable,
    pub psibar_tables: Vec<CocycleTable>,
    pub periodicity: Vec<PeriodicityCheck>,
}

impl Periodization {
    pub fn psibar(&self, n: [i64; 3]) -> Option<&CocycleTable> {
        self.psibar_tables.iter().find(|t| t.n == n)
    }
}

fn unit_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / n as f64).collect()
}

fn span(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

const BASIS: [[i64; 3]; 3] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
const PAIR_SUMS: [[i64; 3]; 3] = [[1, 1, 0], [1, 0, 1], [0, 1, 1]];

/// `samples` points per unit of `s`. Errors with `PeriodicityViolated` when
/// `|Psibar(e_j, x + 1) - Psibar(e_j, x)|` exceeds eight times the tail
/// bounds involved.
pub fn periodize(cocycle: &CenterCocycle, samples: usize, workers: Workers) -> Result<Periodization> {
    let r = cocycle.chart.s_radius;
    let v_table = CocycleTable::build([0; 3], span(-r, r, TABLE_SAMPLES), workers, |s| cocycle.v(s))?;
    let grid = unit_grid(samples);
    let mut psibar_tables = Vec::new();
    let mut periodicity = Vec::new();
    for n in BASIS {
        let base = CocycleTable::build(n, grid.clone(), workers, |s| cocycle.psibar(&n, s))?;
        let shifted = try_map_indexed(samples, workers, |i| cocycle.psibar(&n, grid[i] + 1.0))?;
        let mut residual = 0.0f64;
        let mut limit = 0.0f64;
        for (i, sh) in shifted.iter().enumerate() {
            residual = residual.max((sh.value - base.values[i]).abs());
            limit = limit.max(PERIODICITY_FACTOR * (sh.tail_bound + base.tail_bounds[i]));
        }
        if residual > limit {
            return Err(Error::PeriodicityViolated { residual, limit });
        }
        periodicity.push(PeriodicityCheck { n, residual, limit });
        psibar_tables.push(base);
    }
    for n in PAIR_SUMS {
        psibar_tables.push(CocycleTable::build(n, grid.clone(), workers, |s| cocycle.psibar(&n, s))?);
    }
    Ok(Periodization { v_table, psibar_tables, periodicity })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CocycleMean {
    pub n: [i64; 3],
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicCocycleSolution {
    /// Rotation solve of `wbar(x + alpha_2) - wbar(x) = Psibar(e2, x) - c(e2)`.
    pub rotation: RotationSolveReport,
    pub c_of_n: Vec<CocycleMean>,
    /// `max |c(e_i + e_j) - c(e_i) - c(e_j)|`.
    pub additivity_residual: f64,
}

impl PeriodicCocycleSolution {
    pub fn wbar(&self) -> &BandLimitedFunction {
        &self.rotation.w
    }

    pub fn c(&self, n: [i64; 3]) -> Option<f64> {
        self.c_of_n.iter().find(|m| m.n == n).map(|m| m.c)
    }

    pub fn max_abs_c(&self) -> f64 {
        self.c_of_n.iter().filter(|m| BASIS.contains(&m.n)).fold(0.0, |a, m| a.max(m.c.abs()))
    }
}

pub fn solve_periodic_cocycle(
    tables: &Periodization,
    alpha2: f64,
    band: usize,
    threshold: f64,
) -> Result<PeriodicCocycleSolution> {
    let e2 = tables.psibar([0, 1, 0]).ok_or_else(|| Error::Invalid("missing Psibar(e2) table".into()))?;
    let grid = GridFunction { dim: 1, n: e2.values.len(), samples: e2.values.clone() };
    let coeffs = grid.dft(band)?;
    let rotation = solve_rotation(&coeffs, &Alpha::from_f64(alpha2)?, threshold)?;
    let c_of_n: Vec<CocycleMean> = tables.psibar_tables.iter().map(|t| CocycleMean { n: t.n, c: t.mean() }).collect();
    let c = |n: [i64; 3]| c_of_n.iter().find(|m| m.n == n).map_or(0.0, |m| m.c);
    let mut additivity_residual = 0.0f64;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let sum: [i64; 3] = std::array::from_fn(|k| BASIS[i][k] + BASIS[j][k]);
        additivity_residual = additivity_residual.max((c(sum) - c(BASIS[i]) - c(BASIS[j])).abs());
    }
    Ok(PeriodicCocycleSolution { rotation, c_of_n, additivity_residual })
}

/// Fit of `max_s |Psi(n, s)|` against `|n|_inf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub scales: Vec<i64>,
    pub max_abs: Vec<f64>,
    /// `a + b log |n|`.
    pub log_intercept: f64,
    pub log_slope: f64,
    /// Slope of `log max_abs` against `log |n|`.
    pub power_exponent: f64,
    pub sublinear: bool,
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

/// Directions `e_1, e_2, e_3, (1,1,1), (1,-1,0)` at each scale, `s` on a
/// uniform grid of `[0, 1)`.
pub fn growth_fit(cocycle: &CenterCocycle, workers: Workers) -> Result<GrowthFit> {
    const DIRS: [[i64; 3]; 5] = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1], [1, -1, 0]];
    let grid = unit_grid(GROWTH_SAMPLES);
    let mut max_abs = Vec::new();
    for &k in &GROWTH_SCALES {
        let jobs = DIRS.len() * grid.len();
        let vals = try_map_indexed(jobs, workers, |i| {
            let d = DIRS[i / grid.len()];
            cocycle.psi(&[k * d[0], k * d[1], k * d[2]], grid[i % grid.len()])
        })?;
        max_abs.push(vals.iter().fold(0.0f64, |m, v| m.max(v.value.abs())));
    }
    let logs: Vec<(f64, f64)> = GROWTH_SCALES.iter().zip(&max_abs).map(|(&k, &m)| ((k as f64).ln(), m)).collect();
    let (log_intercept, log_slope) = least_squares(&logs);
    let floor = max_abs.iter().fold(0.0f64, |m, &x| m.max(x)) * 1e-300;
    let power_exponent = if floor > 0.0 {
        least_squares(&logs.iter().map(|&(x, m)| (x, m.max(floor).ln())).collect::<Vec<_>>()).1
    } else {
        0.0
    };
    Ok(GrowthFit {
        scales: GROWTH_SCALES.to_vec(),
        max_abs,
        log_intercept,
        log_slope,
        power_exponent,
        sublinear: power_exponent < 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DaSettings {
    pub grid_n: usize,
    pub band: usize,
    pub pcf: PcfSettings,
    pub resonance_threshold: f64,
    /// Tolerance for the center-line equation and deck-invariance checks.
    pub check_tol: f64,
    pub probe_samples: usize,
    pub seed: u64,
}

impl Default for DaSettings {
    fn default() -> Self {
        DaSettings {
            grid_n: 32,
            band: 64,
            pcf: PcfSettings::default(),
            resonance_threshold: DEFAULT_RESONANCE_THRESHOLD,
            check_tol: 1e-6,
            probe_samples: 16,
            seed: 0,
        }
    }
}

/// Transfer function of the full problem: `w = wbar - v` on the center line,
/// extended by PCF.
pub struct DaTransfer<'a> {
    cocycle: CenterCocycle<'a>,
    wbar: &'a BandLimitedFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LiftValue {
    pub value: f64,
    pub gap: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

impl<'a> DaTransfer<'a> {
    pub fn new(cocycle: CenterCocycle<'a>, wbar: &'a BandLimitedFunction) -> Self {
        DaTransfer { cocycle, wbar }
    }

    /// `w(s)` on the center line.
    pub fn w(&self, s: f64) -> Result<CocycleValue> {
        let v = self.cocycle.v(s)?;
        Ok(CocycleValue { value: self.wbar.evaluate(&[s]) - v.value, ..v })
    }

    /// `u` at a lift `x`: `w(s(x_c))` plus the PCF from `x_c` to `x`.
    pub fn u(&self, x: &[f64]) -> Result<LiftValue> {
        let chart = self.cocycle.chart;
        let s = chart.coordinate(x);
        let xc = chart.point(s);
        let w = self.w(s)?;
        let su = two_leg_connect(&chart.splitting, &xc, x, LegOrder::Su)?;
        let us = two_leg_connect(&chart.splitting, &xc, x, LegOrder::Us)?;
        let dyn_ = &self.cocycle.dynamics;
        let su = pcf_sequence(self.cocycle.psi, dyn_, &su, self.cocycle.settings)?;
        let us = pcf_sequence(self.cocycle.psi, dyn_, &us, self.cocycle.settings)?;
        Ok(LiftValue {
            value: w.value + su.value,
            gap: (su.value - us.value).abs(),
            tail_bound: w.tail_bound + su.tail_bound.max(us.tail_bound),
            terms: w.terms.max(su.truncation_k).max(us.truncation_k),
        })
    }
}

/// Audit artifacts of a run, for dumping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DaArtifacts {
    pub cocycle_tables: Vec<CocycleTable>,
    pub periodization: Periodization,
    pub wbar: BandLimitedFunction,
    pub w_table: CocycleTable,
}

#[derive(Debug, Clone, Serialize)]
pub struct DaReport {
    pub convention: &'static str,
    pub chart: CenterLineChart,
    pub band: usize,
    pub samples_per_unit: usize,
    pub alpha2_profile: DiophantineProfile,
    pub periodic_cocycle: PeriodicCocycleSolution,
    pub periodicity: Vec<PeriodicityCheck>,
    pub center_equation_residual: f64,
    pub deck_residual: f64,
    pub check_tol: f64,
    pub checks_ok: bool,
    pub growth: GrowthFit,
    pub solver: SolverReport,
    #[serde(skip)]
    pub artifacts: Option<DaArtifacts>,
}

pub fn solve_da(m: &IntMatrix, phi: &BandLimitedFunction, settings: &DaSettings, workers: Workers) -> Result<DaReport> {
    let chart = build_center_chart(m)?;
    let cocycle = CenterCocycle::new(&chart, phi, settings.pcf)?;
    let probe = trivial_pcf_test(
        phi,
        cocycle.dynamics(),
        &chart.splitting,
        settings.probe_samples,
        settings.seed,
        settings.pcf,
    )?;
    let samples = 8 * settings.band.max(1);
    let periodization = periodize(&cocycle, samples, workers)?;
    let solution = solve_periodic_cocycle(&periodization, chart.alpha[1], settings.band, settings.resonance_threshold)?;
    let alpha2_profile = diophantine_profile(&Alpha::from_f64(chart.alpha[1])?, PROFILE_Q_MAX, &PROFILE_TAUS)?;
    let growth = growth_fit(&cocycle, workers)?;

    let r = chart.s_radius;
    let cocycle_tables = BASIS
        .iter()
        .map(|&n| CocycleTable::build(n, span(-r, r, TABLE_SAMPLES), workers, |s| cocycle.psi(&n, s)))
        .collect::<Result<Vec<_>>>()?;
    let wbar = solution.wbar().clone();
    let transfer = DaTransfer::new(cocycle, &wbar);
    let w_table = CocycleTable::build([0; 3], span(-r, r, TABLE_SAMPLES), workers, |s| transfer.w(s))?;

    // center-line equation w(lambda_c s) - w(s) = psi(s v1) - psi(0)
    let lc = chart.lambda_c;
    let psi0 = phi.evaluate(&[0.0; 3]);
    let reach = r / lc.abs().max(1.0);
    let center = try_map_indexed(CENTER_SAMPLES, workers, |i| {
        let s = -reach + 2.0 * reach * i as f64 / (CENTER_SAMPLES - 1) as f64;
        let lhs = transfer.w(lc * s)?.value - transfer.w(s)?.value;
        Ok::<f64, Error>((lhs - phi.evaluate(&chart.point(s)) + psi0).abs())
    })?;
    let center_equation_residual = center.iter().fold(0.0f64, |a, &b| a.max(b));

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let lifts: Vec<[f64; 3]> = (0..DECK_SAMPLES).map(|_| std::array::from_fn(|_| rng.gen::<f64>())).collect();
    let deck = try_map_indexed(DECK_SAMPLES * 3, workers, |i| {
        let x = lifts[i / 3];
        let mut y = x;
        y[i % 3] += 1.0;
        Ok::<f64, Error>((transfer.u(&y)?.value - transfer.u(&x)?.value).abs())
    })?;
    let deck_residual = deck.iter().fold(0.0f64, |a, &b| a.max(b));

    let solver = extend_to_grid(&transfer, phi, m, settings, workers)?;
    let mut solver = solver;
    solver.trivial_pcf = Some(probe);
    let checks_ok = center_equation_residual <= settings.check_tol
        && deck_residual <= settings.check_tol
        && solution.max_abs_c() <= settings.check_tol
        && solution.additivity_residual <= settings.check_tol;
    Ok(DaReport {
        convention: DA_CONVENTION,
        band: settings.band,
        samples_per_unit: samples,
        alpha2_profile,
        periodicity: periodization.periodicity.clone(),
        periodic_cocycle: solution,
        center_equation_residual,
        deck_residual,
        check_tol: settings.check_tol,
        checks_ok,
        growth,
        solver,
        artifacts: Some(DaArtifacts { cocycle_tables, periodization, wbar, w_table }),
        chart,
    })
}

/// Evaluates `u` on the `N^3` grid and the residual of
/// `u o A - u + c - phi` through the grid permutation `j -> A j mod N`.
fn extend_to_grid(
    transfer: &DaTransfer,
    phi: &BandLimitedFunction,
    m: &IntMatrix,
    settings: &DaSettings,
    workers: Workers,
) -> Result<SolverReport> {
    let n = settings.grid_n;
    let total = n * n * n;
    let values = try_map_indexed(total, workers, |i| {
        let j = crate::function::grid_multi_index(3, n, i);
        let x: Vec<f64> = j.iter().map(|&k| k as f64 / n as f64).collect();
        transfer.u(&x)
    })?;
    let gap = values.iter().fold(0.0f64, |g, v| g.max(v.gap));
    let limit = PATH_GAP_FACTOR * settings.pcf.tol;
    if gap > limit {
        return Err(Error::TrivialPcfViolated { gap, limit });
    }
    let u = GridFunction { dim: 3, n, samples: values.iter().map(|v| v.value).collect() };
    let c = phi.evaluate(&[0.0; 3]);
    let residuals = map_indexed(total, workers, |i| {
        let j = u.multi_index(i);
        let jj: Vec<i64> = j.iter().map(|&k| k as i64).collect();
        let aj: Vec<usize> = m.apply_i64(&jj).iter().map(|&k| k.rem_euclid(n as i64) as usize).collect();
        u.samples[u.flat_index(&aj)] - u.samples[i] + c - phi.evaluate(&u.point(i))
    });
    let residual_sup = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let residual_l2 = (residuals.iter().map(|r| r * r).sum::<f64>() / total as f64).sqrt();
    Ok(SolverReport {
        c,
        grid_n: n,
        tol: settings.pcf.tol,
        residual_sup,
        residual_l2,
        max_truncation_k: values.iter().map(|v| v.terms).max().unwrap_or(0),
        max_tail_bound: values.iter().fold(0.0, |a, v| a.max(v.tail_bound)),
        pcf_path_gap: gap,
        regularity: FunctionRegularity::of(phi),
        holder_fit: holder_fit(&u),
        trivial_pcf: None,
        u,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use num_complex::Complex64;

    use super::*;

    fn companion() -> IntMatrix {
        IntMatrix::from_rows(&[[0, 1, 0], [0, 0, 1], [1, 3, 0]]).unwrap()
    }

    fn random_u0(seed: u64) -> BandLimitedFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for a in -2i64..=2 {
            for b in -2i64..=2 {
                for c in -2i64..=2 {
                    let k = [a, b, c];
                    let first = k.iter().find(|&&x| x != 0);
                    if matches!(first, Some(&x) if x > 0) {
                        terms.push((k.to_vec(), Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
                    }
                }
            }
        }
        let u = BandLimitedFunction::from_half(3, terms).unwrap();
        u.scale(1.0 / u.coefficient_l1())
    }

    fn coboundary(seed: u64) -> (BandLimitedFunction, BandLimitedFunction) {
        let u0 = random_u0(seed);
        let phi = BandLimitedFunction::coboundary(&u0, &companion(), 0.3).unwrap();
        (u0, phi)
    }

    #[test]
    fn chart_alpha_matches_left_eigenvector() {
        let chart = build_center_chart(&companion()).unwrap();
        // left eigenvector of the companion matrix normalized at e1: (1, l^2, l)
        let l = 2.0 * (7.0 * PI / 9.0).cos();
        assert_eq!(chart.alpha[0], 1.0);
        assert!((chart.alpha[1] - l * l).abs() < 1e-12);
        assert!((chart.alpha[2] - l).abs() < 1e-12);
        assert!((chart.lambda_c - l).abs() < 1e-12);
        assert!(chart.projection_residual < 1e-12);
        assert!(chart.cf_depth.iter().all(|&d| d >= 20));
        assert!(chart.minimality_gap <= 1.0 / 50.0);
    }

    #[test]
    fn bump_is_a_partition_germ() {
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            let b = bump(x);
            if x <= 1.0 / 3.0 {
                assert_eq!(b, 0.0);
            } else if x >= 2.0 / 3.0 {
                assert_eq!(b, 1.0);
            } else {
                assert!((0.0..=1.0).contains(&b));
                assert!(bump(x + 0.005) >= b);
            }
        }
    }

    #[test]
    fn trivial_inputs() {
        let chart = build_center_chart(&companion()).unwrap();
        let k = BandLimitedFunction::constant(3, 1.7);
        let cc = CenterCocycle::new(&chart, &k, PcfSettings::default()).unwrap();
        assert_eq!(cc.psi(&[0, 0, 0], 0.4).unwrap().value, 0.0);
        for n in [[1, 0, 0], [0, -2, 3]] {
            assert_eq!(cc.psi(&n, 0.4).unwrap().value, 0.0);
            assert_eq!(cc.psibar(&n, 0.9).unwrap().value, 0.0);
            assert_eq!(cc.v(2.7).unwrap().value, 0.0);
        }
        let r = solve_da(&companion(), &k, &DaSettings { grid_n: 8, ..DaSettings::default() }, Workers(2)).unwrap();
        assert_eq!(r.solver.c, 1.7);
        assert!(r.solver.u.samples.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn coboundary_cocycle_identities() {
        let chart = build_center_chart(&companion()).unwrap();
        let (u0, phi) = coboundary(3);
        let cc = CenterCocycle::new(&chart, &phi, PcfSettings::default()).unwrap();
        let g = |s: f64| u0.evaluate(&chart.point(s));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let m: [i64; 3] = std::array::from_fn(|_| rng.gen_range(-4..=4));
            let n: [i64; 3] = std::array::from_fn(|_| rng.gen_range(-4..=4));
            let s = rng.gen_range(-2.0..2.0);
            let a = cc.psi(&[m[0] + n[0], m[1] + n[1], m[2] + n[2]], s).unwrap();
            let b = cc.psi(&m, s).unwrap();
            let c = cc.psi(&n, chart.translate(&m, s)).unwrap();
            let tails = a.tail_bound.max(b.tail_bound).max(c.tail_bound);
            assert!((a.value - b.value - c.value).abs() <= 6.0 * tails);
            // closed form for a coboundary: g(s + n . alpha) - g(s)
            let direct = g(chart.translate(&m, s)) - g(s);
            assert!((b.value - direct).abs() <= 2.0 * b.tail_bound + 1e-12);
        }
        // v(x + l) - v(x) = -Psi(l e1, x) at points off [0, 1)
        for _ in 0..20 {
            let x = rng.gen_range(-2.0..2.0);
            let l = rng.gen_range(1..=8i64);
            let lhs = cc.v(x + l as f64).unwrap();
            let rhs = cc.psi(&[l, 0, 0], x).unwrap();
            let v0 = cc.v(x).unwrap();
            let tails = lhs.tail_bound + rhs.tail_bound + v0.tail_bound;
            assert!((lhs.value - v0.value + rhs.value).abs() <= 4.0 * tails);
        }
    }

    #[test]
    fn commutation_transport() {
        let chart = build_center_chart(&companion()).unwrap();
        let phi = BandLimitedFunction::cosine(&[1, -1, 2], 0.7).add(&BandLimitedFunction::sine(&[0, 1, 1], 0.4));
        let cc = CenterCocycle::new(&chart, &phi, PcfSettings::default()).unwrap();
        let settings = PcfSettings::default();
        let curvature: f64 = phi
            .records()
            .iter()
            .map(|r| {
                2.0 * (r.re.hypot(r.im)) * (2.0 * PI) * (2.0 * PI) * r.k.iter().map(|&k| (k * k) as f64).sum::<f64>()
            })
            .sum();
        for (n, s) in [([1, 0, 0], 0.2), ([0, 2, -1], -0.7), ([1, 1, 1], 1.3)] {
            let x = chart.point(s);
            let from: Vec<f64> = (0..3).map(|j| x[j] + n[j] as f64).collect();
            let to = chart.point(chart.translate(&n, s));
            let path = two_leg_connect(&chart.splitting, &from, &to, LegOrder::Su).unwrap();
            let before = pcf_sequence(&phi, cc.dynamics(), &path, settings).unwrap();
            let after = pcf_sequence(&phi, cc.dynamics(), &path.image(cc.dynamics()), settings).unwrap();
            let expected = phi.evaluate(&to) - phi.evaluate(&from);
            let bound = before.tail_bound + after.tail_bound;
            // unstable-leg sums are only Holder in the base point along E^s, so
            // rounding of the imaged origin costs about curvature * eps^0.6
            let defect = (after.value - before.value - expected).abs();
            assert!(defect <= bound + 1e-9 * curvature, "{defect:e} vs {bound:e}");
        }
    }

    #[test]
    fn round_trip_small_grid() {
        let (u0, phi) = coboundary(11);
        let settings = DaSettings { grid_n: 8, ..DaSettings::default() };
        let r = solve_da(&companion(), &phi, &settings, Workers(0)).unwrap();
        assert!(r.periodicity.iter().all(|p| p.residual <= 1e-8));
        assert!(r.periodic_cocycle.max_abs_c() <= 1e-6);
        assert!(r.periodic_cocycle.additivity_residual <= 1e-6);
        assert!(r.solver.residual_sup <= 1e-6, "residual {}", r.solver.residual_sup);
        assert!(r.checks_ok);
        assert!(r.growth.sublinear);
        let exact = GridFunction::sample(&u0, 8, Workers::SEQUENTIAL);
        let shift = r.solver.u.mean() - exact.mean();
        let rec = r.solver.u.samples.iter().zip(&exact.samples).fold(0.0f64, |m, (a, b)| m.max((a - b - shift).abs()));
        assert!(rec <= 1e-6, "recovery {rec}");
        let sol = &r.periodic_cocycle.rotation;
        for mode in &sol.modes {
            assert!((mode.w * mode.denominator - mode.psi).norm() <= 1e-14 * mode.psi.norm());
        }
    }

    #[test]
    fn generic_observable_breaks_periodicity_or_paths() {
        let phi = BandLimitedFunction::cosine(&[1, 0, 0], 1.0);
        let settings = DaSettings { grid_n: 4, band: 16, ..DaSettings::default() };
        let err = solve_da(&companion(), &phi, &settings, Workers::SEQUENTIAL).unwrap_err();
        assert!(err.is_hypothesis_violation(), "{err}");
    }
}
