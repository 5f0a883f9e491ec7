//! Skew products `A_alpha(x, t) = (Ax, t + alpha)` on the mapping torus
//! `M_B = T^2 x R / ((x, t + 1) ~ (Bx, t))`.
//!
//! The central circle `{0} x S^1` is invariant and carries the rigid
//! rotation by `alpha`; every fiber `T^2 x {t}` is one su-leaf of `A`. The
//! transfer function is the rotation solution on the circle plus the PCF
//! from `(0, t)` to `(x, t)` inside the fiber.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::da::bump;
use crate::error::{Error, Result};
use crate::function::{grid_multi_index, BandLimitedFunction, GridFunction};
use crate::livsic::{holder_fit, FunctionRegularity, SolverReport, PATH_GAP_FACTOR};
use crate::par::{map_indexed, try_map_indexed, Workers};
use crate::pcf::{
    apply_reduced, pcf_sequence, AccessibleSequence, Leaf, LeafDynamics, LeafPath, Observable, PcfSettings,
    TailProfile, TrivialPcfReport,
};
use crate::smalldiv::{
    diophantine_profile, small_denominator, solve_rotation, Alpha, DiophantineProfile, RotationSolveReport,
    DEFAULT_RESONANCE_THRESHOLD,
};
use crate::torus::{dot, reduce_unit, spectral_splitting, IntMatrix, Line, SpectralSplitting, SplittingClass};

const EIGENLINE_TOL: f64 = 1e-10;

pub const AB_CONVENTION: &str = "u(A_alpha p) - u(p) = phi(p) + c with c = -mean of phi(0, .) \
     (rotation convention); drift = -c solves phi = u o A_alpha - u + drift; points (x, t) with t in [0, 1), \
     (x, t + 1) ~ (Bx, t)";

#[derive(Debug, Clone, Serialize)]
pub struct ABSystem {
    pub a: IntMatrix,
    pub b: IntMatrix,
    #[serde(skip)]
    b_inv: IntMatrix,
    #[serde(skip)]
    a_inv: IntMatrix,
    pub alpha: Alpha,
    pub commute_check: bool,
    pub a_hyperbolic: bool,
    #[serde(skip)]
    pub splitting: SpectralSplitting,
    /// Eigenvalues of `B` on the stable and unstable lines of `A`.
    pub mu_s: f64,
    pub mu_u: f64,
}

fn line_eigenvalue(m: &IntMatrix, v: &[f64]) -> Result<f64> {
    let w = m.apply_f64(v);
    let mu = dot(&w, v);
    let off = w.iter().zip(v).fold(0.0f64, |e, (a, b)| e.max((a - mu * b).abs()));
    if off > EIGENLINE_TOL * mu.abs().max(1.0) {
        return Err(Error::NonCommuting);
    }
    Ok(mu)
}

pub fn build_ab(a: &IntMatrix, b: &IntMatrix, alpha: Alpha) -> Result<ABSystem> {
    for m in [a, b] {
        if m.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: m.dim() });
        }
        m.require_automorphism()?;
    }
    if a.checked_mul(b)? != b.checked_mul(a)? {
        return Err(Error::NonCommuting);
    }
    let splitting = spectral_splitting(a)?;
    if splitting.class != SplittingClass::Anosov2d {
        return Err(Error::NotHyperbolic);
    }
    let mu_s = line_eigenvalue(b, splitting.eigenvector(Line::Stable).expect("stable line"))?;
    let mu_u = line_eigenvalue(b, splitting.eigenvector(Line::Unstable).expect("unstable line"))?;
    Ok(ABSystem {
        a: a.clone(),
        b: b.clone(),
        b_inv: b.inverse()?,
        a_inv: a.inverse()?,
        alpha,
        commute_check: true,
        a_hyperbolic: true,
        splitting,
        mu_s,
        mu_u,
    })
}

impl ABSystem {
    /// Fractional part of `alpha` as a float.
    pub fn alpha_f64(&self) -> f64 {
        let a = self.alpha.to_f64();
        a - a.floor()
    }

    /// Canonical representative with `t` in `[0, 1)`.
    pub fn normalize(&self, p: &[f64]) -> [f64; 3] {
        let mut x = [p[0], p[1]];
        let mut t = p[2];
        while t >= 1.0 {
            t -= 1.0;
            apply_reduced(&self.b, &mut x);
        }
        while t < 0.0 {
            t += 1.0;
            apply_reduced(&self.b_inv, &mut x);
        }
        [reduce_unit(x[0]), reduce_unit(x[1]), t]
    }

    /// `A_alpha(p)`, normalized.
    pub fn map(&self, p: &[f64]) -> [f64; 3] {
        let x = self.a.apply_f64(&p[..2]);
        self.normalize(&[x[0], x[1], p[2] + self.alpha_f64()])
    }

    fn leaf3(&self, line: Line) -> Vec<f64> {
        let v = self.splitting.eigenvector(line).expect("hyperbolic");
        vec![v[0], v[1], 0.0]
    }
}

/// `Glue(h)(x, t) = (1 - b(t)) h(x, t) + b(t) h(Bx, t)` on `t in [0, 1)`,
/// extended by the gluing. Smooth on `M_B` because `b` is flat at both ends.
#[derive(Debug, Clone)]
pub struct GluedFunction {
    pub h: BandLimitedFunction,
    b: IntMatrix,
    b_inv: IntMatrix,
    identity: bool,
    /// `max(1, |mu|)` on the stable and unstable lines.
    stretch: [f64; 2],
    v_s: Vec<f64>,
    v_u: Vec<f64>,
}

impl GluedFunction {
    pub fn new(sys: &ABSystem, h: BandLimitedFunction) -> Result<Self> {
        if h.dim() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: h.dim() });
        }
        Ok(GluedFunction {
            h,
            b: sys.b.clone(),
            b_inv: sys.b_inv.clone(),
            identity: sys.b == IntMatrix::identity(2),
            stretch: [sys.mu_s.abs().max(1.0), sys.mu_u.abs().max(1.0)],
            v_s: sys.leaf3(Line::Stable),
            v_u: sys.leaf3(Line::Unstable),
        })
    }

    fn eval_normalized(&self, x: [f64; 2], t: f64) -> f64 {
        let w = bump(t);
        if self.identity || w == 0.0 {
            return self.h.evaluate(&[x[0], x[1], t]);
        }
        let mut bx = x;
        apply_reduced(&self.b, &mut bx);
        if w == 1.0 {
            return self.h.evaluate(&[bx[0], bx[1], t]);
        }
        (1.0 - w) * self.h.evaluate(&[x[0], x[1], t]) + w * self.h.evaluate(&[bx[0], bx[1], t])
    }

    pub fn eval_point(&self, p: &[f64]) -> f64 {
        let mut x = [p[0], p[1]];
        let mut t = p[2];
        while t >= 1.0 {
            t -= 1.0;
            apply_reduced(&self.b, &mut x);
        }
        while t < 0.0 {
            t += 1.0;
            apply_reduced(&self.b_inv, &mut x);
        }
        self.eval_normalized(x, t)
    }

    /// `t -> Glue(h)(0, t) = h(0, t)`.
    pub fn circle(&self) -> Result<BandLimitedFunction> {
        restrict_to_circle(&self.h)
    }

    /// Lipschitz bound along a fiber direction `v` that `B` scales by
    /// `stretch`.
    fn lipschitz_fiber(&self, v: &[f64], stretch: f64) -> f64 {
        if self.identity {
            return self.h.lipschitz_along(v);
        }
        stretch * self.h.lipschitz_along(v)
    }
}

/// `t -> h(0, 0, t)`.
pub fn restrict_to_circle(h: &BandLimitedFunction) -> Result<BandLimitedFunction> {
    let mut acc: BTreeMap<i64, Complex64> = BTreeMap::new();
    let mut constant = h.mean();
    for r in h.records() {
        if r.k == [0; 3] {
            continue;
        }
        let c = Complex64::new(r.re, r.im);
        let l = r.k[2];
        match l.cmp(&0) {
            std::cmp::Ordering::Greater => *acc.entry(l).or_default() += c,
            std::cmp::Ordering::Less => *acc.entry(-l).or_default() += c.conj(),
            std::cmp::Ordering::Equal => constant += 2.0 * c.re,
        }
    }
    let f = BandLimitedFunction::from_half(1, acc.into_iter().map(|(l, c)| (vec![l], c)))?;
    Ok(f.add_constant(constant))
}

/// Observables on `M_B`.
#[derive(Debug, Clone)]
pub enum MbObservable {
    Glued(GluedFunction),
    /// `u o A_alpha - u + c`.
    Coboundary {
        u: GluedFunction,
        a: IntMatrix,
        alpha: f64,
        c: f64,
        lambda: [f64; 2],
    },
}

impl MbObservable {
    pub fn glued(sys: &ABSystem, h: BandLimitedFunction) -> Result<Self> {
        Ok(MbObservable::Glued(GluedFunction::new(sys, h)?))
    }

    pub fn coboundary(sys: &ABSystem, h: BandLimitedFunction, c: f64) -> Result<Self> {
        Ok(MbObservable::Coboundary {
            u: GluedFunction::new(sys, h)?,
            a: sys.a.clone(),
            alpha: sys.alpha_f64(),
            c,
            lambda: [sys.splitting.lambda_s, sys.splitting.lambda_u],
        })
    }

    /// `t -> phi(0, t)`.
    pub fn circle(&self) -> Result<BandLimitedFunction> {
        match self {
            MbObservable::Glued(g) => g.circle(),
            MbObservable::Coboundary { u, alpha, c, .. } => {
                let w = u.circle()?;
                Ok(w.translate(&[*alpha]).sub(&w).add_constant(*c))
            }
        }
    }

    fn lipschitz_fiber(&self, v: &[f64], line: usize) -> f64 {
        match self {
            MbObservable::Glued(g) => g.lipschitz_fiber(v, g.stretch[line]),
            MbObservable::Coboundary { u, lambda, .. } => {
                (lambda[line].abs() + 1.0) * u.lipschitz_fiber(v, u.stretch[line])
            }
        }
    }
}

impl Observable for MbObservable {
    fn eval(&self, p: &[f64]) -> f64 {
        match self {
            MbObservable::Glued(g) => g.eval_point(p),
            MbObservable::Coboundary { u, a, alpha, c, .. } => {
                let x = a.apply_f64(&p[..2]);
                u.eval_point(&[x[0], x[1], p[2] + alpha]) - u.eval_point(p) + c
            }
        }
    }

    fn lipschitz(&self) -> f64 {
        let h = match self {
            MbObservable::Glued(g) => g,
            MbObservable::Coboundary { u, .. } => u,
        };
        let stretch = h.stretch[0].max(h.stretch[1]);
        let base = h.h.lipschitz() * stretch;
        match self {
            MbObservable::Glued(_) => base,
            MbObservable::Coboundary { a, .. } => base * (a.frobenius() + 1.0),
        }
    }

    fn lipschitz_along(&self, v: &[f64]) -> f64 {
        let g = match self {
            MbObservable::Glued(g) => g,
            MbObservable::Coboundary { u, .. } => u,
        };
        let line = usize::from(dot(v, &g.v_s).abs() < dot(v, &g.v_u).abs());
        self.lipschitz_fiber(v, line)
    }
}

/// Skew dynamics on `(x, t)`; `t` stays in `[0, 1)` and a wrap applies `B`,
/// which scales the leg delta by `mu`.
pub struct ABDynamics {
    a: IntMatrix,
    a_inv: IntMatrix,
    b: IntMatrix,
    b_inv: IntMatrix,
    alpha: f64,
    lambda_s: f64,
    lambda_u: f64,
    mu_s: f64,
    mu_u: f64,
    v_s: Vec<f64>,
    v_u: Vec<f64>,
}

impl ABDynamics {
    pub fn new(sys: &ABSystem) -> Self {
        ABDynamics {
            a: sys.a.clone(),
            a_inv: sys.a_inv.clone(),
            b: sys.b.clone(),
            b_inv: sys.b_inv.clone(),
            alpha: sys.alpha_f64(),
            lambda_s: sys.splitting.eigenvalue(Line::Stable).expect("stable line"),
            lambda_u: sys.splitting.eigenvalue(Line::Unstable).expect("unstable line"),
            mu_s: sys.mu_s,
            mu_u: sys.mu_u,
            v_s: sys.leaf3(Line::Stable),
            v_u: sys.leaf3(Line::Unstable),
        }
    }
}

impl LeafDynamics for ABDynamics {
    fn state_dim(&self) -> usize {
        3
    }

    fn leaf_vector(&self, leaf: Leaf) -> &[f64] {
        match leaf {
            Leaf::Stable => &self.v_s,
            Leaf::Unstable => &self.v_u,
        }
    }

    fn step(&self, p: &mut [f64], leaf: Leaf) -> f64 {
        let mut x = [p[0], p[1]];
        let mut t = p[2];
        let mut factor;
        match leaf {
            Leaf::Stable => {
                apply_reduced(&self.a, &mut x);
                factor = self.lambda_s;
                t += self.alpha;
                while t >= 1.0 {
                    t -= 1.0;
                    apply_reduced(&self.b, &mut x);
                    factor *= self.mu_s;
                }
            }
            Leaf::Unstable => {
                apply_reduced(&self.a_inv, &mut x);
                factor = 1.0 / self.lambda_u;
                t -= self.alpha;
                while t < 0.0 {
                    t += 1.0;
                    apply_reduced(&self.b_inv, &mut x);
                    factor /= self.mu_u;
                }
            }
        }
        p[0] = x[0];
        p[1] = x[1];
        p[2] = t;
        factor
    }

    /// At most `j alpha + 1` wraps in `j` steps, each scaling by at most
    /// `m = max(1, |mu|^{+-1})`.
    fn tail_profile(&self, leaf: Leaf) -> TailProfile {
        let (rate, m) = match leaf {
            Leaf::Stable => (self.lambda_s.abs(), self.mu_s.abs().max(1.0)),
            Leaf::Unstable => (1.0 / self.lambda_u.abs(), (1.0 / self.mu_u.abs()).max(1.0)),
        };
        TailProfile { c: m, rho: rate * m.powf(self.alpha) }
    }

    fn reduce(&self, p: &mut [f64]) {
        p[0] = reduce_unit(p[0]);
        p[1] = reduce_unit(p[1]);
    }
}

/// Two-leg fiber path from `(0, t)` (or any base) to `(x, t)` under the
/// splitting of `A`; `stable_first` picks the SU order.
pub fn fiber_path(sys: &ABSystem, from: &[f64], to: &[f64], stable_first: bool) -> Result<AccessibleSequence> {
    let w = [to[0] - from[0], to[1] - from[1]];
    let parts = sys.splitting.su_decompose(&w)?;
    let (first, leaf1, leaf2) = if stable_first {
        (&parts.stable, Leaf::Stable, Leaf::Unstable)
    } else {
        (&parts.unstable, Leaf::Unstable, Leaf::Stable)
    };
    let leg1 = LeafPath::new(leaf1, from.to_vec(), vec![first[0], first[1], 0.0]);
    let mid = leg1.end();
    let leg2 = LeafPath::new(leaf2, mid.clone(), vec![to[0] - mid[0], to[1] - mid[1], 0.0]);
    Ok(AccessibleSequence::path(vec![leg1, leg2]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ABSettings {
    pub grid_n: usize,
    pub pcf: PcfSettings,
    pub resonance_threshold: f64,
    pub q_max: i128,
    /// Largest `tau` accepted by the Diophantine screen.
    pub tau_bound: f64,
    pub gluing_samples: usize,
    pub gluing_tol: f64,
    pub probe_samples: usize,
    pub seed: u64,
}

impl Default for ABSettings {
    fn default() -> Self {
        ABSettings {
            grid_n: 16,
            pcf: PcfSettings::default(),
            resonance_threshold: DEFAULT_RESONANCE_THRESHOLD,
            q_max: 10_000,
            tau_bound: 3.0,
            gluing_samples: 1000,
            gluing_tol: 1e-8,
            probe_samples: 16,
            seed: 0,
        }
    }
}

const SCREEN_TAUS: [f64; 3] = [1.0, 2.0, 3.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GluingCheck {
    pub samples: usize,
    pub max_residual: f64,
    pub tol: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ABSolverReport {
    pub convention: &'static str,
    pub system: ABSystem,
    pub diophantine_profile: DiophantineProfile,
    /// Rotation solve on the central circle; its `w` is the leaf solution.
    pub leaf_solution: RotationSolveReport,
    /// Rotation-convention constant.
    pub c: f64,
    pub drift: f64,
    /// `max |full residual - rotation residual|` on central-leaf grid points.
    pub leaf_reduction_defect: f64,
    pub gluing: GluingCheck,
    pub solver: SolverReport,
}

/// Screens `alpha`: a rational rotation number is reported as the
/// resonance at `l = q`.
pub fn diophantine_screen(
    alpha: &Alpha,
    psi: &BandLimitedFunction,
    q_max: i128,
    tau_bound: f64,
) -> Result<DiophantineProfile> {
    match diophantine_profile(alpha, q_max, &SCREEN_TAUS) {
        Ok(p) => {
            if p.empirical_c.iter().any(|t| t.tau <= tau_bound && t.c > 0.0) {
                return Ok(p);
            }
            let l = p.empirical_c[0].argmin_q as i64;
            Err(Error::Resonance {
                l,
                denominator: small_denominator(alpha, l)?.norm(),
                coefficient: psi.coefficient(&[l]).norm(),
            })
        }
        Err(Error::RationalDetected { q, .. }) => {
            let l = q as i64;
            Err(Error::Resonance {
                l,
                denominator: small_denominator(alpha, l)?.norm(),
                coefficient: psi.coefficient(&[l]).norm(),
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct FiberValue {
    value: f64,
    gap: f64,
    tail_bound: f64,
    terms: usize,
}

struct Transfer<'a> {
    sys: &'a ABSystem,
    phi: &'a MbObservable,
    dynamics: ABDynamics,
    w: &'a BandLimitedFunction,
    settings: PcfSettings,
}

impl Transfer<'_> {
    /// `u(x, t) = w(t) + PCF((0, t) -> (x, t))`, any real `t`.
    fn u(&self, p: &[f64]) -> Result<FiberValue> {
        let base = [0.0, 0.0, p[2]];
        let w = self.w.evaluate(&[p[2]]);
        if p[0] == 0.0 && p[1] == 0.0 {
            return Ok(FiberValue { value: w, ..FiberValue::default() });
        }
        let su = pcf_sequence(self.phi, &self.dynamics, &fiber_path(self.sys, &base, p, true)?, self.settings)?;
        let us = pcf_sequence(self.phi, &self.dynamics, &fiber_path(self.sys, &base, p, false)?, self.settings)?;
        Ok(FiberValue {
            value: w + su.value,
            gap: (su.value - us.value).abs(),
            tail_bound: su.tail_bound.max(us.tail_bound),
            terms: su.truncation_k.max(us.truncation_k),
        })
    }
}

fn fiber_probe(
    sys: &ABSystem,
    phi: &MbObservable,
    dynamics: &ABDynamics,
    samples: usize,
    seed: u64,
    settings: PcfSettings,
) -> Result<TrivialPcfReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vs = sys.leaf3(Line::Stable);
    let vu = sys.leaf3(Line::Unstable);
    let mut report = TrivialPcfReport {
        cycles_tested: samples,
        max_abs: 0.0,
        worst_tail_bound: 0.0,
        worst_cycle: None,
        verdict: true,
    };
    for _ in 0..samples {
        let p: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
        let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let ds: Vec<f64> = vs.iter().map(|x| a * x).collect();
        let du: Vec<f64> = vu.iter().map(|x| b * x).collect();
        let l1 = LeafPath::new(Leaf::Stable, p.clone(), ds.clone());
        let l2 = LeafPath::new(Leaf::Unstable, l1.end(), du.clone());
        let l3 = LeafPath::new(Leaf::Stable, l2.end(), ds.iter().map(|x| -x).collect());
        let mut l4 = LeafPath::new(Leaf::Unstable, l3.end(), du.iter().map(|x| -x).collect());
        l4.delta = p.iter().zip(&l4.origin).map(|(a, b)| a - b).collect();
        let cycle = AccessibleSequence { legs: vec![l1, l2, l3, l4], is_cycle: true, lifted: true };
        let v = pcf_sequence(phi, dynamics, &cycle, settings)?;
        if v.value.abs() > settings.tol + v.tail_bound {
            report.verdict = false;
        }
        if report.worst_cycle.is_none() || v.value.abs() > report.max_abs {
            report.max_abs = v.value.abs();
            report.worst_tail_bound = v.tail_bound;
            report.worst_cycle = Some(cycle);
        }
    }
    Ok(report)
}

pub fn solve_ab(sys: &ABSystem, phi: &MbObservable, settings: &ABSettings, workers: Workers) -> Result<ABSolverReport> {
    let psi = phi.circle()?;
    let profile = diophantine_screen(&sys.alpha, &psi, settings.q_max, settings.tau_bound)?;
    let rotation = solve_rotation(&psi, &sys.alpha, settings.resonance_threshold)?;
    let dynamics = ABDynamics::new(sys);
    for leaf in [Leaf::Stable, Leaf::Unstable] {
        let rho = dynamics.tail_profile(leaf).rho;
        if !(rho < 1.0) {
            return Err(Error::NonConvergent(rho));
        }
    }
    let probe = fiber_probe(sys, phi, &dynamics, settings.probe_samples, settings.seed, settings.pcf)?;
    let c = rotation.c;
    let transfer = Transfer { sys, phi, dynamics, w: &rotation.w, settings: settings.pcf };

    let n = settings.grid_n;
    let total = n * n * n;
    let point = |i: usize| -> [f64; 3] {
        let j = grid_multi_index(3, n, i);
        [j[0] as f64 / n as f64, j[1] as f64 / n as f64, j[2] as f64 / n as f64]
    };
    let values = try_map_indexed(total, workers, |i| {
        let p = point(i);
        Ok::<_, Error>((transfer.u(&p)?, transfer.u(&sys.map(&p))?))
    })?;
    let gap = values.iter().fold(0.0f64, |g, (a, b)| g.max(a.gap).max(b.gap));
    let limit = PATH_GAP_FACTOR * settings.pcf.tol;
    if gap > limit {
        return Err(Error::TrivialPcfViolated { gap, limit });
    }
    let residuals = map_indexed(total, workers, |i| {
        let (u, v) = values[i];
        v.value - u.value - phi.eval(&point(i)) - c
    });
    let mut leaf_reduction_defect = 0.0f64;
    for (i, r) in residuals.iter().enumerate() {
        let p = point(i);
        if p[0] == 0.0 && p[1] == 0.0 {
            let t1 = sys.map(&p)[2];
            let rot = rotation.w.evaluate(&[t1]) - rotation.w.evaluate(&[p[2]]) - psi.evaluate(&[p[2]]) - c;
            leaf_reduction_defect = leaf_reduction_defect.max((r - rot).abs());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x9e37_79b9);
    let glue_pts: Vec<[f64; 3]> =
        (0..settings.gluing_samples).map(|_| std::array::from_fn(|_| rng.gen::<f64>())).collect();
    let glue = try_map_indexed(glue_pts.len(), workers, |i| {
        let p = glue_pts[i];
        let above = transfer.u(&[p[0], p[1], p[2] + 1.0])?;
        let bx = sys.b.apply_f64(&p[..2]);
        let below = transfer.u(&[reduce_unit(bx[0]), reduce_unit(bx[1]), p[2]])?;
        Ok::<f64, Error>((above.value - below.value).abs())
    })?;
    let max_glue = glue.iter().fold(0.0f64, |a, &b| a.max(b));

    let u = GridFunction { dim: 3, n, samples: values.iter().map(|(u, _)| u.value).collect() };
    let residual_sup = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let residual_l2 = (residuals.iter().map(|r| r * r).sum::<f64>() / total as f64).sqrt();
    let h = match phi {
        MbObservable::Glued(g) => &g.h,
        MbObservable::Coboundary { u, .. } => &u.h,
    };
    let solver = SolverReport {
        c,
        grid_n: n,
        tol: settings.pcf.tol,
        residual_sup,
        residual_l2,
        max_truncation_k: values.iter().map(|(a, b)| a.terms.max(b.terms)).max().unwrap_or(0),
        max_tail_bound: values.iter().fold(0.0, |m, (a, b)| m.max(a.tail_bound).max(b.tail_bound)),
        pcf_path_gap: gap,
        regularity: FunctionRegularity::of(h),
        holder_fit: holder_fit(&u),
        trivial_pcf: Some(probe),
        u,
    };
    Ok(ABSolverReport {
        convention: AB_CONVENTION,
        system: sys.clone(),
        diophantine_profile: profile,
        c,
        drift: -c,
        leaf_solution: rotation,
        leaf_reduction_defect,
        gluing: GluingCheck {
            samples: glue_pts.len(),
            max_residual: max_glue,
            tol: settings.gluing_tol,
            ok: max_glue <= settings.gluing_tol,
        },
        solver,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat() -> IntMatrix {
        IntMatrix::from_rows(&[[2, 1], [1, 1]]).unwrap()
    }

    fn random_h(seed: u64, cutoff: i64) -> BandLimitedFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for a in -cutoff..=cutoff {
            for b in -cutoff..=cutoff {
                for l in -cutoff..=cutoff {
                    let k = [a, b, l];
                    if matches!(k.iter().find(|&&x| x != 0), Some(&x) if x > 0) {
                        terms.push((k.to_vec(), Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
                    }
                }
            }
        }
        let h = BandLimitedFunction::from_half(3, terms).unwrap();
        h.scale(1.0 / h.coefficient_l1())
    }

    #[test]
    fn build_validates() {
        let id = IntMatrix::identity(2);
        assert!(build_ab(&cat(), &id, Alpha::golden()).is_ok());
        let s = build_ab(&cat(), &cat(), Alpha::golden()).unwrap();
        assert!((s.mu_u - s.splitting.eigenvalue(Line::Unstable).unwrap()).abs() < 1e-12);
        let swap = IntMatrix::from_rows(&[[0, 1], [1, 0]]).unwrap();
        assert_eq!(build_ab(&cat(), &swap, Alpha::golden()).unwrap_err(), Error::NonCommuting);
        let shear = IntMatrix::from_rows(&[[1, 1], [0, 1]]).unwrap();
        assert_eq!(build_ab(&shear, &id, Alpha::golden()).unwrap_err(), Error::NotHyperbolic);
    }

    #[test]
    fn circle_restriction_matches_evaluation() {
        let h = random_h(1, 2);
        let psi = restrict_to_circle(&h).unwrap();
        for i in 0..20 {
            let t = i as f64 / 20.0;
            assert!((psi.evaluate(&[t]) - h.evaluate(&[0.0, 0.0, t])).abs() < 1e-14);
        }
    }

    #[test]
    fn glued_function_respects_gluing() {
        let sys = build_ab(&cat(), &cat(), Alpha::golden()).unwrap();
        let g = GluedFunction::new(&sys, random_h(2, 2)).unwrap();
        for i in 0..50 {
            let p = [0.13 * i as f64 % 1.0, 0.29 * i as f64 % 1.0, (i as f64 + 0.5) / 50.0];
            let bx = sys.b.apply_f64(&p[..2]);
            let a = g.eval_point(&[p[0], p[1], p[2] + 1.0]);
            let b = g.eval_point(&[bx[0], bx[1], p[2]]);
            assert!((a - b).abs() < 1e-13);
        }
        // continuity across t = 1
        let x = [0.3, 0.7];
        let below = g.eval_point(&[x[0], x[1], 1.0 - 1e-9]);
        let above = g.eval_point(&[x[0], x[1], 1.0]);
        assert!((below - above).abs() < 1e-6);
    }

    #[test]
    fn fiber_constant_reduces_to_rotation() {
        let sys = build_ab(&cat(), &IntMatrix::identity(2), Alpha::golden()).unwrap();
        let h = BandLimitedFunction::cosine(&[0, 0, 1], 0.7).add(&BandLimitedFunction::sine(&[0, 0, 3], 0.2));
        let phi = MbObservable::glued(&sys, h.clone()).unwrap();
        let settings = ABSettings { grid_n: 8, ..ABSettings::default() };
        let r = solve_ab(&sys, &phi, &settings, Workers(2)).unwrap();
        assert_eq!(r.leaf_reduction_defect, 0.0);
        for (i, &u) in r.solver.u.samples.iter().enumerate() {
            let t = r.solver.u.point(i)[2];
            assert_eq!(u, r.leaf_solution.w.evaluate(&[t]));
        }
        assert!(r.solver.residual_sup < 1e-12);
        assert_eq!(r.c, -h.mean());
    }

    #[test]
    fn coboundary_round_trip_trivial_gluing() {
        let sys = build_ab(&cat(), &IntMatrix::identity(2), Alpha::golden()).unwrap();
        let h = random_h(3, 2);
        let phi = MbObservable::coboundary(&sys, h.clone(), 0.25).unwrap();
        let settings = ABSettings { grid_n: 8, gluing_samples: 50, ..ABSettings::default() };
        let r = solve_ab(&sys, &phi, &settings, Workers(0)).unwrap();
        assert!(r.solver.residual_sup <= 1e-6, "{}", r.solver.residual_sup);
        assert!((r.drift - 0.25).abs() < 1e-12);
        let exact = GridFunction::sample(&h, 8, Workers::SEQUENTIAL);
        let shift = r.solver.u.mean() - exact.mean();
        let rec = r.solver.u.samples.iter().zip(&exact.samples).fold(0.0f64, |m, (a, b)| m.max((a - b - shift).abs()));
        assert!(rec <= 1e-6, "{rec}");
        assert!(r.gluing.ok);
    }

    #[test]
    fn nontrivial_gluing_is_consistent() {
        let sys = build_ab(&cat(), &cat(), Alpha::golden()).unwrap();
        let phi = MbObservable::coboundary(&sys, random_h(4, 1), 0.0).unwrap();
        let settings = ABSettings { grid_n: 6, gluing_samples: 100, gluing_tol: 1e-5, ..ABSettings::default() };
        let r = solve_ab(&sys, &phi, &settings, Workers(0)).unwrap();
        assert!(r.gluing.max_residual <= 1e-5, "{}", r.gluing.max_residual);
        assert!(r.solver.residual_sup <= 1e-6, "{}", r.solver.residual_sup);
    }

    #[test]
    fn rational_alpha_is_resonant() {
        let sys = build_ab(&cat(), &IntMatrix::identity(2), Alpha::rational(1, 2).unwrap()).unwrap();
        let h = BandLimitedFunction::cosine(&[0, 0, 2], 1.0);
        let err =
            solve_ab(&sys, &MbObservable::glued(&sys, h).unwrap(), &ABSettings::default(), Workers(1)).unwrap_err();
        assert!(matches!(err, Error::Resonance { l: 2, .. }), "{err}");
        assert!(err.is_hypothesis_violation());
    }
}
