//! Periodic data and the Livšic solver for hyperbolic automorphisms of `T^2`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::{BandLimitedFunction, GridFunction};
use crate::par::{try_map_indexed, Workers};
use crate::pcf::{
    homoclinic_cycles, pair_pcf, pcf_sequence, trivial_pcf_test, Leaf, LeafDynamics, PcfSettings, TorusDynamics,
    TrivialPcfReport,
};
use crate::torus::{
    dot, periodic_points_exact, spectral_splitting, IntMatrix, RationalPoint, SpectralSplitting, SplittingClass,
    TorusPoint, DEFAULT_POINT_CAP,
};

/// Hard limit on the SU/US discrepancy, as a multiple of the tolerance.
pub const PATH_GAP_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub representative: TorusPoint,
    pub exact: RationalPoint,
    pub period: u32,
    pub birkhoff_average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicDataReport {
    pub max_period: u32,
    pub orbits: Vec<OrbitRecord>,
    pub points_per_period: Vec<u128>,
    pub spread: f64,
    pub tolerance: f64,
    pub constant_verdict: bool,
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn canonical(p: &RationalPoint) -> RationalPoint {
    let g = p.num.iter().fold(p.den, |g, &n| gcd(g, n));
    RationalPoint { num: p.num.iter().map(|n| n / g).collect(), den: p.den / g }
}

/// Groups every point of period dividing some `n <= max_period` into orbits
/// and records the Birkhoff averages of `phi`.
pub fn periodic_data(phi: &BandLimitedFunction, m: &IntMatrix, max_period: u32) -> Result<PeriodicDataReport> {
    periodic_data_capped(phi, m, max_period, DEFAULT_POINT_CAP)
}

pub fn periodic_data_capped(
    phi: &BandLimitedFunction,
    m: &IntMatrix,
    max_period: u32,
    cap: u128,
) -> Result<PeriodicDataReport> {
    if phi.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: phi.dim() });
    }
    let s = spectral_splitting(m)?;
    if s.class == SplittingClass::NotHyperbolic {
        return Err(Error::NotHyperbolic);
    }
    let mut seen: HashSet<RationalPoint> = HashSet::new();
    let mut orbits = Vec::new();
    let mut counts = Vec::new();
    let mut total: u128 = 0;
    for n in 1..=max_period {
        let points = periodic_points_exact(m, n, cap)?;
        total += points.len() as u128;
        if total > cap {
            return Err(Error::CountOverflow { count: total, cap });
        }
        counts.push(points.len() as u128);
        for p in points {
            let p = canonical(&p);
            if seen.contains(&p) {
                continue;
            }
            let mut orbit = vec![p.clone()];
            let mut q = canonical(&p.apply(m));
            while q != p {
                orbit.push(q.clone());
                q = canonical(&q.apply(m));
            }
            let sum: f64 = orbit.iter().map(|x| phi.evaluate(x.to_point().coords())).sum();
            let period = orbit.len() as u32;
            orbits.push(OrbitRecord {
                representative: p.to_point(),
                exact: p.clone(),
                period,
                birkhoff_average: sum / period as f64,
            });
            seen.extend(orbit);
        }
    }
    let (lo, hi) = orbits.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| {
        (lo.min(o.birkhoff_average), hi.max(o.birkhoff_average))
    });
    let spread = if orbits.is_empty() { 0.0 } else { hi - lo };
    let tolerance = 1e-8 * phi.lipschitz().max(1.0);
    Ok(PeriodicDataReport {
        max_period,
        orbits,
        points_per_period: counts,
        spread,
        tolerance,
        constant_verdict: spread <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicEquivalenceReport {
    pub m_range: i64,
    pub max_period: u32,
    pub cycles: usize,
    pub length2_max_pcf: f64,
    pub length2_tail_bound: f64,
    pub length2_trivial: bool,
    pub periodic_spread: f64,
    pub periodic_constant: bool,
    /// False only when the sampled length-2 functionals vanish while the
    /// periodic data is not constant.
    pub consistent: bool,
}

/// Length-2 homoclinic functionals against periodic data.
pub fn periodic_equivalence_experiment(
    phi: &BandLimitedFunction,
    m: &IntMatrix,
    m_range: i64,
    max_period: u32,
    settings: PcfSettings,
) -> Result<PeriodicEquivalenceReport> {
    let s = spectral_splitting(m)?;
    let dynamics = TorusDynamics::new(&s)?;
    let cycles = homoclinic_cycles(&s, m_range)?;
    let mut max_pcf = 0.0f64;
    let mut max_tail = 0.0f64;
    for h in &cycles {
        let v = pcf_sequence(phi, &dynamics, &h.cycle, settings)?;
        max_pcf = max_pcf.max(v.value.abs());
        max_tail = max_tail.max(v.tail_bound);
    }
    let periodic = periodic_data(phi, m, max_period)?;
    let length2_trivial = max_pcf <= 2.0 * settings.tol + max_tail;
    Ok(PeriodicEquivalenceReport {
        m_range,
        max_period,
        cycles: cycles.len(),
        length2_max_pcf: max_pcf,
        length2_tail_bound: max_tail,
        length2_trivial,
        periodic_spread: periodic.spread,
        periodic_constant: periodic.constant_verdict,
        consistent: !(length2_trivial && !periodic.constant_verdict),
    })
}

/// Grid and modulus diagnostics of a solved transfer function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub constant: f64,
    pub exponent: f64,
}

/// Least-squares fit of `log omega(h) = log L + theta log h` over dyadic
/// grid steps, with `omega(h)` the largest axis increment at distance `h`.
pub fn holder_fit(u: &GridFunction) -> HolderFit {
    let n = u.n;
    let mut pts = Vec::new();
    let mut step = 1;
    while step <= n / 8 {
        let mut omega = 0.0f64;
        for i in 0..u.len() {
            let j = u.multi_index(i);
            for axis in 0..u.dim {
                let mut k = j.clone();
                k[axis] = (k[axis] + step) % n;
                omega = omega.max((u.samples[u.flat_index(&k)] - u.samples[i]).abs());
            }
        }
        if omega > 0.0 {
            pts.push(((step as f64 / n as f64).ln(), omega.ln()));
        }
        step *= 2;
    }
    if pts.len() < 2 {
        return HolderFit { constant: 0.0, exponent: 1.0 };
    }
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx).powi(2)));
    let exponent = sxy / sxx;
    HolderFit { constant: (my - exponent * mx).exp(), exponent }
}

/// Regularity data of the observable class: Lipschitz, so `theta = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionRegularity {
    pub theta: f64,
    pub constant: f64,
}

impl FunctionRegularity {
    pub fn of(phi: &BandLimitedFunction) -> Self {
        FunctionRegularity { theta: 1.0, constant: phi.lipschitz() }
    }
}

/// Result of a grid solve of `phi = u o f - u + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub c: f64,
    pub grid_n: usize,
    pub tol: f64,
    pub residual_sup: f64,
    pub residual_l2: f64,
    pub max_truncation_k: usize,
    pub max_tail_bound: f64,
    pub pcf_path_gap: f64,
    pub regularity: FunctionRegularity,
    pub holder_fit: HolderFit,
    pub trivial_pcf: Option<TrivialPcfReport>,
    #[serde(skip)]
    pub u: GridFunction,
}

/// Transfer function of a Livšic problem on `T^2`, `u(x) = PCF` along the
/// SU path `0 -> w_s -> x` with `x` the representative in `[0,1)^2`.
pub struct LivsicSolver<'a> {
    phi: &'a BandLimitedFunction,
    splitting: SpectralSplitting,
    dynamics: TorusDynamics,
    settings: PcfSettings,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub value: f64,
    pub gap: f64,
    pub terms: usize,
    pub tail_bound: f64,
}

impl<'a> LivsicSolver<'a> {
    pub fn new(phi: &'a BandLimitedFunction, m: &IntMatrix, settings: PcfSettings) -> Result<Self> {
        if m.dim() != 2 || phi.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: m.dim().max(phi.dim()) });
        }
        let splitting = spectral_splitting(m)?;
        if splitting.class != SplittingClass::Anosov2d {
            return Err(Error::NotHyperbolic);
        }
        let dynamics = TorusDynamics::new(&splitting)?;
        Ok(LivsicSolver { phi, splitting, dynamics, settings })
    }

    /// `c = phi(0)`, forced by the equation at the fixed point.
    pub fn drift(&self) -> f64 {
        self.phi.evaluate(&[0.0, 0.0])
    }

    pub fn value_at(&self, x: &[f64]) -> Result<PointValue> {
        let lift: Vec<f64> = x.iter().map(|&c| crate::torus::reduce_unit(c)).collect();
        let pair = pair_pcf(self.phi, &self.dynamics, &self.splitting, &[0.0, 0.0], &lift, self.settings)?;
        Ok(PointValue {
            value: pair.su.value,
            gap: pair.gap,
            terms: pair.su.truncation_k.max(pair.us.truncation_k),
            tail_bound: pair.su.tail_bound.max(pair.us.tail_bound),
        })
    }

    pub fn trivial_pcf(&self, samples: usize, seed: u64) -> Result<TrivialPcfReport> {
        trivial_pcf_test(self.phi, &self.dynamics, &self.splitting, samples, seed, self.settings)
    }

    /// Solves on the `n x n` grid and measures the residual through the exact
    /// grid permutation `j -> M j mod n`.
    pub fn solve_grid(&self, n: usize, workers: Workers) -> Result<SolverReport> {
        let tables = GridTables::new(self, n, workers);
        let values = try_map_indexed(n * n, workers, |i| self.grid_value(&tables, i))?;
        let gap = values.iter().fold(0.0f64, |g, v| g.max(v.gap));
        let limit = PATH_GAP_FACTOR * self.settings.tol;
        if gap > limit {
            return Err(Error::TrivialPcfViolated { gap, limit });
        }
        let u = GridFunction { dim: 2, n, samples: values.iter().map(|v| v.value).collect() };
        let c = self.drift();
        let m = &self.splitting.matrix;
        let residuals: Vec<f64> = (0..u.len())
            .map(|i| {
                let j = u.multi_index(i);
                let x = u.point(i);
                let mj: Vec<usize> = m
                    .apply_i64(&[j[0] as i64, j[1] as i64])
                    .into_iter()
                    .map(|v| v.rem_euclid(n as i64) as usize)
                    .collect();
                self.phi.evaluate(&x) - (u.samples[u.flat_index(&mj)] - u.samples[i] + c)
            })
            .collect();
        let residual_sup = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        let residual_l2 = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
        Ok(SolverReport {
            c,
            grid_n: n,
            tol: self.settings.tol,
            residual_sup,
            residual_l2,
            max_truncation_k: values.iter().map(|v| v.terms).max().unwrap_or(0),
            max_tail_bound: values.iter().fold(0.0f64, |a, v| a.max(v.tail_bound)),
            pcf_path_gap: gap,
            regularity: FunctionRegularity::of(self.phi),
            holder_fit: holder_fit(&u),
            trivial_pcf: None,
            u,
        })
    }
}

/// Samples of `phi` and the two grid permutations `j -> M^{+-1} j mod n`.
struct GridTables {
    n: usize,
    phi: Vec<f64>,
    forward: Vec<usize>,
    backward: Vec<usize>,
}

impl GridTables {
    fn new(solver: &LivsicSolver<'_>, n: usize, workers: Workers) -> Self {
        let phi = GridFunction::sample(solver.phi, n, workers).samples;
        let perm = |m: &IntMatrix| -> Vec<usize> {
            (0..n * n)
                .map(|i| {
                    let (a, b) = ((i / n) as i64, (i % n) as i64);
                    let ni = n as i64;
                    let r0 = (m.get(0, 0) * a + m.get(0, 1) * b).rem_euclid(ni);
                    let r1 = (m.get(1, 0) * a + m.get(1, 1) * b).rem_euclid(ni);
                    (r0 * ni + r1) as usize
                })
                .collect()
        };
        let forward = perm(&solver.splitting.matrix);
        let backward = perm(&solver.splitting.matrix.inverse().expect("automorphism"));
        GridTables { n, phi, forward, backward }
    }

    fn point(&self, i: usize) -> [f64; 2] {
        [(i / self.n) as f64 / self.n as f64, (i % self.n) as f64 / self.n as f64]
    }
}

/// Sum of one leg in the grid fast path, with the same truncation rule as
/// [`crate::pcf::pcf_leg`]. `near(k, delta_k)` returns the orbit difference
/// of the `k`-th term.
fn leg_sum(
    lip: f64,
    rho: f64,
    factor: f64,
    first: f64,
    tol: f64,
    cap: usize,
    mut term: impl FnMut(usize, f64) -> f64,
) -> Result<(f64, usize, f64)> {
    let mut scale = first;
    let bound = |s: f64| lip * s.abs() / (1.0 - rho);
    let mut sum = 0.0;
    let mut k = 0;
    while bound(scale) > tol {
        if k >= cap {
            return Err(Error::TolUnreachable { tol, cap });
        }
        sum += term(k, scale);
        k += 1;
        scale *= factor;
    }
    Ok((sum, k, bound(scale)))
}

impl LivsicSolver<'_> {
    /// SU and US values at grid point `i`. Every orbit term pairs a grid
    /// point `M^{+-k} x` (table lookup) with its leaf neighbour (direct
    /// evaluation), or sits on the fixed point `0`.
    fn grid_value(&self, t: &GridTables, i: usize) -> Result<PointValue> {
        let x = t.point(i);
        let parts = self.splitting.su_decompose(&x)?;
        let vs = self.dynamics.leaf_vector(Leaf::Stable);
        let vu = self.dynamics.leaf_vector(Leaf::Unstable);
        let a_s = dot(vs, &parts.stable);
        let a_u = dot(vu, &parts.unstable);
        let ls = self.dynamics.forward_factor(Leaf::Stable);
        let lu = self.dynamics.forward_factor(Leaf::Unstable);
        let (lip_s, lip_u) = (self.phi.lipschitz_along(vs), self.phi.lipschitz_along(vu));
        let (tol, cap) = (self.settings.tol, self.settings.term_cap);
        let phi0 = self.phi.evaluate(&[0.0, 0.0]);
        let along = |v: &[f64], s: f64| [s * v[0], s * v[1]];

        let from_zero_s = leg_sum(lip_s, ls.abs(), ls, a_s, tol, cap, |_, s| self.phi.evaluate(&along(vs, s)) - phi0)?;
        let from_zero_u = leg_sum(lip_u, 1.0 / lu.abs(), 1.0 / lu, a_u / lu, tol, cap, |_, s| {
            self.phi.evaluate(&along(vu, s)) - phi0
        })?;
        // unstable leg into x: terms phi(M^-k x) - phi(M^-k x - lu^-k w_u), k >= 1
        let mut idx = i;
        let into_x_u = leg_sum(lip_u, 1.0 / lu.abs(), 1.0 / lu, a_u / lu, tol, cap, |_, s| {
            idx = t.backward[idx];
            let p = t.point(idx);
            let d = along(vu, s);
            t.phi[idx] - self.phi.evaluate(&[p[0] - d[0], p[1] - d[1]])
        })?;
        // stable leg into x: terms phi(M^k x) - phi(M^k x - ls^k w_s), k >= 0
        let mut idx = i;
        let into_x_s = leg_sum(lip_s, ls.abs(), ls, a_s, tol, cap, |k, s| {
            if k > 0 {
                idx = t.forward[idx];
            }
            let p = t.point(idx);
            let d = along(vs, s);
            t.phi[idx] - self.phi.evaluate(&[p[0] - d[0], p[1] - d[1]])
        })?;

        let su = -from_zero_s.0 + into_x_u.0;
        let us = from_zero_u.0 - into_x_s.0;
        Ok(PointValue {
            value: su,
            gap: (su - us).abs(),
            terms: from_zero_s.1.max(from_zero_u.1).max(into_x_u.1).max(into_x_s.1),
            tail_bound: (from_zero_s.2 + into_x_u.2).max(from_zero_u.2 + into_x_s.2),
        })
    }
}

/// Full Livšic solve: advisory trivial-PCF probe, then the grid solve.
pub fn solve_livsic(
    phi: &BandLimitedFunction,
    m: &IntMatrix,
    grid_n: usize,
    settings: PcfSettings,
    workers: Workers,
) -> Result<SolverReport> {
    let solver = LivsicSolver::new(phi, m, settings)?;
    let probe = solver.trivial_pcf(16, 0)?;
    let mut report = solver.solve_grid(grid_n, workers)?;
    report.trivial_pcf = Some(probe);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat() -> IntMatrix {
        IntMatrix::from_rows(&[[2, 1], [1, 1]]).unwrap()
    }

    #[test]
    fn constant_has_zero_spread() {
        let phi = BandLimitedFunction::constant(2, 2.5);
        let r = periodic_data(&phi, &cat(), 6).unwrap();
        assert_eq!(r.spread, 0.0);
        assert!(r.orbits.iter().all(|o| o.birkhoff_average == 2.5));
        // |Fix(A^n)| = 1, 5, 16, 45, 121, 320; the union over n <= 6 is
        // 320 + 121 + 45 - 5 - 1 - 1 + 1 by inclusion-exclusion
        let total: u32 = r.orbits.iter().map(|o| o.period).sum();
        assert_eq!(total, 480);
        assert_eq!(r.points_per_period, vec![1, 5, 16, 45, 121, 320]);
    }

    #[test]
    fn cosine_periodic_data_is_not_constant() {
        let phi = BandLimitedFunction::cosine(&[1, 0], 1.0);
        let r = periodic_data(&phi, &cat(), 8).unwrap();
        assert_eq!(r.orbits[0].period, 1);
        assert_eq!(r.orbits[0].birkhoff_average, 1.0);
        assert!(r.spread > 0.1);
        assert!(!r.constant_verdict);
    }

    #[test]
    fn coboundary_periodic_data() {
        let u = BandLimitedFunction::cosine(&[1, 0], 0.3).add(&BandLimitedFunction::sine(&[1, 1], 0.1));
        let phi = BandLimitedFunction::coboundary(&u, &cat(), 0.7).unwrap();
        let r = periodic_data(&phi, &cat(), 8).unwrap();
        assert!(r.spread <= 1e-10);
        assert!(r.orbits.iter().all(|o| (o.birkhoff_average - 0.7).abs() <= 1e-10));
    }

    #[test]
    fn experiment_on_zero_and_generic() {
        let z = periodic_equivalence_experiment(&BandLimitedFunction::zero(2), &cat(), 2, 6, PcfSettings::default())
            .unwrap();
        assert_eq!(z.length2_max_pcf, 0.0);
        assert_eq!(z.periodic_spread, 0.0);
        assert!(z.consistent);
        let g = periodic_equivalence_experiment(
            &BandLimitedFunction::cosine(&[1, 0], 1.0),
            &cat(),
            2,
            6,
            PcfSettings::default(),
        )
        .unwrap();
        assert!(g.length2_max_pcf > 0.0 && g.periodic_spread > 0.0);
        assert!(g.consistent);
    }

    #[test]
    fn small_round_trip() {
        let u0 = BandLimitedFunction::cosine(&[1, 0], 0.3).add(&BandLimitedFunction::sine(&[1, 1], 0.1));
        let phi = BandLimitedFunction::coboundary(&u0, &cat(), 0.7).unwrap();
        let r = solve_livsic(&phi, &cat(), 32, PcfSettings::default(), Workers::SEQUENTIAL).unwrap();
        assert_eq!(r.c, 0.7);
        assert!(r.residual_sup <= 1e-8);
        let offset = u0.evaluate(&[0.0, 0.0]);
        for i in 0..r.u.len() {
            let x = r.u.point(i);
            assert!((r.u.samples[i] - (u0.evaluate(&x) - offset)).abs() <= 1e-8);
        }
        assert!(r.trivial_pcf.as_ref().unwrap().verdict);
    }

    #[test]
    fn grid_path_matches_generic_pcf() {
        let u0 = BandLimitedFunction::cosine(&[2, -1], 0.4).add(&BandLimitedFunction::sine(&[1, 3], 0.2));
        let phi = BandLimitedFunction::coboundary(&u0, &cat(), -0.2).unwrap();
        let solver = LivsicSolver::new(&phi, &cat(), PcfSettings::default()).unwrap();
        let r = solver.solve_grid(16, Workers::SEQUENTIAL).unwrap();
        for i in [0, 1, 17, 100, 255] {
            let generic = solver.value_at(&r.u.point(i)).unwrap();
            assert!((generic.value - r.u.samples[i]).abs() <= 1e-12, "{i}");
        }
    }

    #[test]
    fn constant_solves_to_zero() {
        let phi = BandLimitedFunction::constant(2, 1.5);
        let r = solve_livsic(&phi, &cat(), 16, PcfSettings::default(), Workers::SEQUENTIAL).unwrap();
        assert_eq!(r.c, 1.5);
        assert!(r.u.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn generic_observable_is_rejected() {
        let phi = BandLimitedFunction::cosine(&[1, 0], 1.0);
        let err = solve_livsic(&phi, &cat(), 16, PcfSettings::default(), Workers::SEQUENTIAL).unwrap_err();
        assert!(matches!(err, Error::TrivialPcfViolated { .. }));
    }
}
