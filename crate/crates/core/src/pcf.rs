//! Periodic cycle functionals along stable and unstable leaves.
//!
//! A stable leg from `x` to `y = x + delta` contributes
//! `-sum_{k>=0} (phi(f^k y) - phi(f^k x))`, an unstable leg
//! `sum_{k>=1} (phi(f^-k y) - phi(f^-k x))`. Orbits are iterated as the pair
//! (reduced base point, delta) with delta rescaled by the leaf eigenvalue, so
//! rounding in the base orbit only enters through the Lipschitz bound times
//! the (small) current delta.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::BandLimitedFunction;
use crate::torus::{dot, norm, reduce_unit, IntMatrix, Line, SpectralSplitting, SplittingClass};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_TERM_CAP: usize = 1_000_000;
const LEAF_TOL: f64 = 1e-10;
const MATCH_TOL: f64 = 1e-12;
const SU_LEAF_TOL: f64 = 1e-8;

/// Something that can be summed along orbits.
pub trait Observable: Sync {
    fn eval(&self, x: &[f64]) -> f64;

    fn lipschitz(&self) -> f64;

    /// Lipschitz constant along the unit direction `v`.
    fn lipschitz_along(&self, v: &[f64]) -> f64 {
        let _ = v;
        self.lipschitz()
    }

    fn eval_diff(&self, x: &[f64], y: &[f64]) -> f64 {
        self.eval(y) - self.eval(x)
    }
}

impl Observable for BandLimitedFunction {
    fn eval(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }

    fn lipschitz(&self) -> f64 {
        BandLimitedFunction::lipschitz(self)
    }

    fn lipschitz_along(&self, v: &[f64]) -> f64 {
        BandLimitedFunction::lipschitz_along(self, v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Leaf {
    #[serde(rename = "s")]
    Stable,
    #[serde(rename = "u")]
    Unstable,
}

impl Leaf {
    pub fn line(self) -> Line {
        match self {
            Leaf::Stable => Line::Stable,
            Leaf::Unstable => Line::Unstable,
        }
    }
}

/// Bound `|delta_{k+j}| <= c * rho^j * |delta_k|` for the iterates a leg uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailProfile {
    pub c: f64,
    pub rho: f64,
}

/// The map acting on leg base points. Stable legs run forward, unstable legs
/// backward; `step` moves the base point one iterate in that direction and
/// returns the scalar factor that carries the leg delta along.
pub trait LeafDynamics: Sync {
    fn state_dim(&self) -> usize;

    fn leaf_vector(&self, leaf: Leaf) -> &[f64];

    fn step(&self, x: &mut [f64], leaf: Leaf) -> f64;

    /// `step` on the base point `x + lo`, with `lo` carrying the rounding
    /// error of `x` so that it does not compound along the orbit.
    fn step_compensated(&self, x: &mut [f64], lo: &mut [f64], leaf: Leaf) -> f64 {
        let _ = lo;
        self.step(x, leaf)
    }

    fn tail_profile(&self, leaf: Leaf) -> TailProfile;

    /// Canonical representative of a base point.
    fn reduce(&self, x: &mut [f64]);
}

/// Linear automorphism of `T^d` with its stable and unstable lines.
#[derive(Debug, Clone)]
pub struct TorusDynamics {
    m: IntMatrix,
    m_inv: IntMatrix,
    lambda_s: f64,
    lambda_u: f64,
    v_s: Vec<f64>,
    v_u: Vec<f64>,
}

impl TorusDynamics {
    pub fn new(s: &SpectralSplitting) -> Result<Self> {
        if s.class == SplittingClass::NotHyperbolic || !s.has_vectors() {
            return Err(Error::NotHyperbolic);
        }
        let lambda_s = s.eigenvalue(Line::Stable).expect("stable line");
        let lambda_u = s.eigenvalue(Line::Unstable).expect("unstable line");
        if lambda_s.abs() >= 1.0 || lambda_u.abs() <= 1.0 {
            return Err(Error::NonConvergent(lambda_s.abs().max(1.0 / lambda_u.abs())));
        }
        Ok(TorusDynamics {
            m: s.matrix.clone(),
            m_inv: s.matrix.inverse()?,
            lambda_s,
            lambda_u,
            v_s: s.eigenvector(Line::Stable).expect("stable line").to_vec(),
            v_u: s.eigenvector(Line::Unstable).expect("unstable line").to_vec(),
        })
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.m
    }

    /// Signed factor by which a leg delta changes when its base point is
    /// mapped forward by `M`.
    pub fn forward_factor(&self, leaf: Leaf) -> f64 {
        match leaf {
            Leaf::Stable => self.lambda_s,
            Leaf::Unstable => self.lambda_u,
        }
    }
}

pub(crate) fn apply_reduced(m: &IntMatrix, x: &mut [f64]) {
    let d = x.len();
    let mut y = [0.0; 3];
    for (i, yi) in y.iter_mut().enumerate().take(d) {
        *yi = (0..d).map(|j| m.get(i, j) as f64 * x[j]).sum();
    }
    for (xi, yi) in x.iter_mut().zip(y) {
        *xi = reduce_unit(yi);
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `x + lo <- M (x + lo) mod 1` in double-double arithmetic.
pub(crate) fn apply_reduced_compensated(m: &IntMatrix, x: &mut [f64], lo: &mut [f64]) {
    let d = x.len();
    let mut hi = [0.0; 3];
    let mut low = [0.0; 3];
    for i in 0..d {
        let (mut sh, mut sl) = (0.0, 0.0);
        for j in 0..d {
            let a = m.get(i, j) as f64;
            let p = a * x[j];
            let pe = a.mul_add(x[j], -p);
            let (t, e) = two_sum(sh, p);
            sh = t;
            sl += e + pe + a * lo[j];
        }
        let (h, l) = two_sum(sh, sl);
        let (a, b) = two_sum(h, -h.floor());
        let (h, l) = two_sum(a, b + l);
        hi[i] = h;
        low[i] = l;
    }
    x.copy_from_slice(&hi[..d]);
    lo.copy_from_slice(&low[..d]);
}

impl LeafDynamics for TorusDynamics {
    fn state_dim(&self) -> usize {
        self.m.dim()
    }

    fn leaf_vector(&self, leaf: Leaf) -> &[f64] {
        match leaf {
            Leaf::Stable => &self.v_s,
            Leaf::Unstable => &self.v_u,
        }
    }

    fn step(&self, x: &mut [f64], leaf: Leaf) -> f64 {
        match leaf {
            Leaf::Stable => {
                apply_reduced(&self.m, x);
                self.lambda_s
            }
            Leaf::Unstable => {
                apply_reduced(&self.m_inv, x);
                1.0 / self.lambda_u
            }
        }
    }

    fn step_compensated(&self, x: &mut [f64], lo: &mut [f64], leaf: Leaf) -> f64 {
        match leaf {
            Leaf::Stable => {
                apply_reduced_compensated(&self.m, x, lo);
                self.lambda_s
            }
            Leaf::Unstable => {
                apply_reduced_compensated(&self.m_inv, x, lo);
                1.0 / self.lambda_u
            }
        }
    }

    fn tail_profile(&self, leaf: Leaf) -> TailProfile {
        let rho = match leaf {
            Leaf::Stable => self.lambda_s.abs(),
            Leaf::Unstable => 1.0 / self.lambda_u.abs(),
        };
        TailProfile { c: 1.0, rho }
    }

    fn reduce(&self, x: &mut [f64]) {
        for xi in x {
            *xi = reduce_unit(*xi);
        }
    }
}

/// A segment of a single stable or unstable leaf, `origin -> origin + delta`.
/// `reversed` runs it backwards; the orbit sums are shared, so a reversed leg
/// is the exact negative of the original.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafPath {
    pub leaf: Leaf,
    pub origin: Vec<f64>,
    pub delta: Vec<f64>,
    #[serde(default)]
    pub reversed: bool,
}

impl LeafPath {
    pub fn new(leaf: Leaf, origin: Vec<f64>, delta: Vec<f64>) -> Self {
        LeafPath { leaf, origin, delta, reversed: false }
    }

    pub fn far_end(&self) -> Vec<f64> {
        self.origin.iter().zip(&self.delta).map(|(a, b)| a + b).collect()
    }

    pub fn start(&self) -> Vec<f64> {
        if self.reversed {
            self.far_end()
        } else {
            self.origin.clone()
        }
    }

    pub fn end(&self) -> Vec<f64> {
        if self.reversed {
            self.origin.clone()
        } else {
            self.far_end()
        }
    }

    pub fn reversed(&self) -> Self {
        LeafPath { reversed: !self.reversed, ..self.clone() }
    }

    /// Image under the map: origin by `M` (as a lift), delta by the eigenvalue.
    pub fn image(&self, dynamics: &TorusDynamics) -> Self {
        let f = dynamics.forward_factor(self.leaf);
        LeafPath {
            leaf: self.leaf,
            origin: dynamics.matrix().apply_f64(&self.origin),
            delta: self.delta.iter().map(|x| f * x).collect(),
            reversed: self.reversed,
        }
    }

    /// Distance of `delta` from the leaf line, relative to `max(1, |delta|)`.
    pub fn leaf_defect(&self, v: &[f64]) -> f64 {
        let a = dot(&self.delta, v);
        let off: f64 = self.delta.iter().zip(v).map(|(d, vi)| (d - a * vi).powi(2)).sum();
        off.sqrt() / norm(&self.delta).max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessibleSequence {
    pub legs: Vec<LeafPath>,
    pub is_cycle: bool,
    /// Lifted cycles close in `R^d`, torus cycles only mod `Z^d`.
    #[serde(default)]
    pub lifted: bool,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(1.0f64, |m, x| m.max(x.abs()))
}

impl AccessibleSequence {
    pub fn path(legs: Vec<LeafPath>) -> Self {
        AccessibleSequence { legs, is_cycle: false, lifted: true }
    }

    pub fn start(&self) -> Option<Vec<f64>> {
        self.legs.first().map(LeafPath::start)
    }

    pub fn end(&self) -> Option<Vec<f64>> {
        self.legs.last().map(LeafPath::end)
    }

    pub fn reversed(&self) -> Self {
        AccessibleSequence { legs: self.legs.iter().rev().map(LeafPath::reversed).collect(), ..self.clone() }
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut legs = self.legs.clone();
        legs.extend(other.legs.iter().cloned());
        AccessibleSequence { legs, is_cycle: false, lifted: self.lifted && other.lifted }
    }

    pub fn image(&self, dynamics: &TorusDynamics) -> Self {
        AccessibleSequence { legs: self.legs.iter().map(|l| l.image(dynamics)).collect(), ..self.clone() }
    }

    /// Checks dimensions, leaf membership of every delta, endpoint matching
    /// and closure. Endpoints are compared to `1e-12` relative.
    pub fn validate<D: LeafDynamics + ?Sized>(&self, dynamics: &D) -> Result<()> {
        let d = dynamics.state_dim();
        for (i, leg) in self.legs.iter().enumerate() {
            if leg.origin.len() != d || leg.delta.len() != d {
                return Err(Error::MalformedSequence(format!("leg {i} has wrong dimension")));
            }
            let defect = leg.leaf_defect(dynamics.leaf_vector(leg.leaf));
            if defect > LEAF_TOL {
                return Err(Error::OffLeaf(defect));
            }
        }
        for (i, w) in self.legs.windows(2).enumerate() {
            let (a, b) = (w[0].end(), w[1].start());
            let gap = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            if gap > MATCH_TOL * max_abs(&a) {
                return Err(Error::MalformedSequence(format!(
                    "leg {i} ends {gap:e} away from the start of leg {}",
                    i + 1
                )));
            }
        }
        if self.is_cycle {
            let (Some(a), Some(b)) = (self.end(), self.start()) else {
                return Err(Error::MalformedSequence("empty cycle".into()));
            };
            let gap = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| {
                let diff = x - y;
                let diff = if self.lifted { diff } else { diff - diff.round() };
                m.max(diff.abs())
            });
            if gap > MATCH_TOL * max_abs(&a) {
                return Err(Error::MalformedSequence(format!("cycle does not close: gap {gap:e}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegValue {
    pub value: f64,
    pub terms: usize,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcfValue {
    pub value: f64,
    /// Largest number of orbit terms used by any leg.
    pub truncation_k: usize,
    pub tail_bound: f64,
    pub legs: Vec<LegValue>,
}

impl PcfValue {
    pub fn zero() -> Self {
        PcfValue { value: 0.0, truncation_k: 0, tail_bound: 0.0, legs: Vec::new() }
    }

    fn push(&mut self, leg: LegValue) {
        self.value += leg.value;
        self.tail_bound += leg.tail_bound;
        self.truncation_k = self.truncation_k.max(leg.terms);
        self.legs.push(leg);
    }
}

/// Truncation settings for the orbit sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcfSettings {
    pub tol: f64,
    pub term_cap: usize,
}

impl Default for PcfSettings {
    fn default() -> Self {
        PcfSettings { tol: DEFAULT_TOL, term_cap: DEFAULT_TERM_CAP }
    }
}

impl PcfSettings {
    pub fn with_tol(tol: f64) -> Self {
        PcfSettings { tol, ..Self::default() }
    }
}

/// Orbit sum of one leg. The tail after the summed terms is at most
/// `Lip * c * |delta_K| / (1 - rho)`, and summation stops once that is below
/// `settings.tol`.
pub fn pcf_leg<O, D>(phi: &O, dynamics: &D, leg: &LeafPath, settings: PcfSettings) -> Result<LegValue>
where
    O: Observable + ?Sized,
    D: LeafDynamics + ?Sized,
{
    let TailProfile { c, rho } = dynamics.tail_profile(leg.leaf);
    if !(rho < 1.0) {
        return Err(Error::NonConvergent(rho));
    }
    let lip = phi.lipschitz_along(dynamics.leaf_vector(leg.leaf));
    let mut x = leg.origin.clone();
    dynamics.reduce(&mut x);
    let mut delta = leg.delta.clone();
    let mut lo = vec![0.0; x.len()];
    let mut y = vec![0.0; x.len()];
    let bound = |delta: &[f64]| lip * c * norm(delta) / (1.0 - rho);

    let mut sum = 0.0;
    let mut terms = 0usize;
    if leg.leaf == Leaf::Unstable {
        let f = dynamics.step_compensated(&mut x, &mut lo, leg.leaf);
        delta.iter_mut().for_each(|d| *d *= f);
    }
    let mut tail = bound(&delta);
    while tail > settings.tol {
        if terms >= settings.term_cap {
            return Err(Error::TolUnreachable { tol: settings.tol, cap: settings.term_cap });
        }
        for ((yi, xi), di) in y.iter_mut().zip(&x).zip(&delta) {
            *yi = xi + di;
        }
        sum += phi.eval_diff(&x, &y);
        terms += 1;
        let f = dynamics.step_compensated(&mut x, &mut lo, leg.leaf);
        delta.iter_mut().for_each(|d| *d *= f);
        tail = bound(&delta);
    }
    let value = match leg.leaf {
        Leaf::Stable => -sum,
        Leaf::Unstable => sum,
    };
    let value = if leg.reversed { -value } else { value };
    Ok(LegValue { value, terms, tail_bound: tail })
}

pub fn pcf_leaf<O, D>(phi: &O, dynamics: &D, leg: &LeafPath, settings: PcfSettings) -> Result<PcfValue>
where
    O: Observable + ?Sized,
    D: LeafDynamics + ?Sized,
{
    AccessibleSequence::path(vec![leg.clone()]).validate(dynamics)?;
    let mut out = PcfValue::zero();
    out.push(pcf_leg(phi, dynamics, leg, settings)?);
    Ok(out)
}

/// Sum over the legs of a validated sequence, legs in order.
pub fn pcf_sequence<O, D>(phi: &O, dynamics: &D, seq: &AccessibleSequence, settings: PcfSettings) -> Result<PcfValue>
where
    O: Observable + ?Sized,
    D: LeafDynamics + ?Sized,
{
    seq.validate(dynamics)?;
    pcf_sequence_unchecked(phi, dynamics, seq, settings)
}

pub(crate) fn pcf_sequence_unchecked<O, D>(
    phi: &O,
    dynamics: &D,
    seq: &AccessibleSequence,
    settings: PcfSettings,
) -> Result<PcfValue>
where
    O: Observable + ?Sized,
    D: LeafDynamics + ?Sized,
{
    let mut out = PcfValue::zero();
    for leg in &seq.legs {
        out.push(pcf_leg(phi, dynamics, leg, settings)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LegOrder {
    #[serde(rename = "su")]
    Su,
    #[serde(rename = "us")]
    Us,
}

/// Two-leg lifted path from `x` to `y` through `L^s(x) ∩ L^u(y)` (order SU)
/// or `L^u(x) ∩ L^s(y)` (order US). The difference must lie in `E^s + E^u`.
pub fn two_leg_connect(s: &SpectralSplitting, x: &[f64], y: &[f64], order: LegOrder) -> Result<AccessibleSequence> {
    let w: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let parts = s.su_decompose(&w)?;
    if let Some(c) = &parts.center {
        let gap = norm(c);
        if gap > SU_LEAF_TOL * norm(&w).max(1.0) {
            return Err(Error::NotOnSuLeaf(gap));
        }
    }
    let (first, first_leaf, second_leaf) = match order {
        LegOrder::Su => (parts.stable, Leaf::Stable, Leaf::Unstable),
        LegOrder::Us => (parts.unstable, Leaf::Unstable, Leaf::Stable),
    };
    let mid: Vec<f64> = x.iter().zip(&first).map(|(a, b)| a + b).collect();
    let second: Vec<f64> = y.iter().zip(&mid).map(|(a, b)| a - b).collect();
    Ok(AccessibleSequence::path(vec![
        LeafPath::new(first_leaf, x.to_vec(), first),
        LeafPath::new(second_leaf, mid, second),
    ]))
}

/// PCF of a point pair along both two-leg orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPcf {
    pub su: PcfValue,
    pub us: PcfValue,
    pub gap: f64,
}

pub fn pair_pcf<O, D>(
    phi: &O,
    dynamics: &D,
    s: &SpectralSplitting,
    x: &[f64],
    y: &[f64],
    settings: PcfSettings,
) -> Result<PairPcf>
where
    O: Observable + ?Sized,
    D: LeafDynamics + ?Sized,
{
    let su = pcf_sequence(phi, dynamics, &two_leg_connect(s, x, y, LegOrder::Su)?, settings)?;
    let us = pcf_sequence(phi, dynamics, &two_leg_connect(s, x, y, LegOrder::Us)?, settings)?;
    let gap = (su.value - us.value).abs();
    Ok(PairPcf { su, us, gap })
}

/// Homoclinic point of the origin attached to a lattice vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomoclinicCycle {
    pub m: Vec<i64>,
    pub cycle: AccessibleSequence,
}

/// Length-2 torus cycles through `0` and the homoclinic point `pi(m_s)`, one
/// for each nonzero `m` with `|m|_inf <= m_range`, based at `base`.
pub fn homoclinic_cycles_at(s: &SpectralSplitting, m_range: i64, base: &[f64]) -> Result<Vec<HomoclinicCycle>> {
    if s.dim() != 2 || s.class != SplittingClass::Anosov2d {
        return Err(Error::NotHyperbolic);
    }
    let mut out = Vec::new();
    for a in -m_range..=m_range {
        for b in -m_range..=m_range {
            if a == 0 && b == 0 {
                continue;
            }
            let m = [a as f64, b as f64];
            let parts = s.su_decompose(&m)?;
            let neg_u: Vec<f64> = parts.unstable.iter().map(|x| -x).collect();
            let neg_s: Vec<f64> = parts.stable.iter().map(|x| -x).collect();
            let unstable = LeafPath::new(Leaf::Unstable, base.to_vec(), neg_u);
            let stable = LeafPath::new(Leaf::Stable, unstable.end(), neg_s);
            let cycle = AccessibleSequence { legs: vec![unstable, stable], is_cycle: true, lifted: false };
            out.push(HomoclinicCycle { m: vec![a, b], cycle });
        }
    }
    Ok(out)
}

pub fn homoclinic_cycles(s: &SpectralSplitting, m_range: i64) -> Result<Vec<HomoclinicCycle>> {
    homoclinic_cycles_at(s, m_range, &[0.0, 0.0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrivialPcfReport {
    pub cycles_tested: usize,
    pub max_abs: f64,
    /// Tail bound of the cycle attaining `max_abs`.
    pub worst_tail_bound: f64,
    pub worst_cycle: Option<AccessibleSequence>,
    pub verdict: bool,
}

/// Rectangle `s, u, -s, -u` of lifted legs based at `p`.
fn rectangle(s: &SpectralSplitting, p: &[f64], a: f64, b: f64) -> AccessibleSequence {
    let vs = s.eigenvector(Line::Stable).expect("stable line");
    let vu = s.eigenvector(Line::Unstable).expect("unstable line");
    let ds: Vec<f64> = vs.iter().map(|x| a * x).collect();
    let du: Vec<f64> = vu.iter().map(|x| b * x).collect();
    let l1 = LeafPath::new(Leaf::Stable, p.to_vec(), ds.clone());
    let l2 = LeafPath::new(Leaf::Unstable, l1.end(), du.clone());
    let l3 = LeafPath::new(Leaf::Stable, l2.end(), ds.iter().map(|x| -x).collect());
    let mut l4 = LeafPath::new(Leaf::Unstable, l3.end(), du.iter().map(|x| -x).collect());
    // close exactly
    l4.delta = p.iter().zip(&l4.origin).map(|(a, b)| a - b).collect();
    AccessibleSequence { legs: vec![l1, l2, l3, l4], is_cycle: true, lifted: true }
}

/// Su-projection of an integer vector onto `E^s + E^u`: the lifted gap
/// between `x + n` and the center translate of `x` it shares an su-leaf with.
pub fn su_part(s: &SpectralSplitting, n: &[f64]) -> Result<Vec<f64>> {
    let parts = s.su_decompose(n)?;
    Ok(parts.stable.iter().zip(&parts.unstable).map(|(a, b)| a + b).collect())
}

/// Commutator of two deck su-displacements, each realized as an SU pair.
fn deck_commutator(s: &SpectralSplitting, p: &[f64], n: &[f64], m: &[f64]) -> Result<AccessibleSequence> {
    let wn = su_part(s, n)?;
    let wm = su_part(s, m)?;
    let mut points = vec![p.to_vec()];
    for w in [&wn, &wm] {
        let last = points.last().expect("nonempty").clone();
        points.push(last.iter().zip(w.iter()).map(|(a, b)| a + b).collect());
    }
    for w in [&wn, &wm] {
        let last = points.last().expect("nonempty").clone();
        points.push(last.iter().zip(w.iter()).map(|(a, b)| a - b).collect());
    }
    *points.last_mut().expect("nonempty") = p.to_vec();
    let mut legs = Vec::new();
    for pair in points.windows(2) {
        legs.extend(two_leg_connect(s, &pair[0], &pair[1], LegOrder::Su)?.legs);
    }
    Ok(AccessibleSequence { legs, is_cycle: true, lifted: true })
}

/// Sampled family of cycles used to probe trivial PCF.
pub fn probe_cycles(s: &SpectralSplitting, samples: usize, seed: u64) -> Result<Vec<AccessibleSequence>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = s.dim();
    let mut out = Vec::new();
    if d == 2 {
        out.extend(homoclinic_cycles(s, 3)?.into_iter().map(|h| h.cycle));
        for _ in 0..samples {
            let p: Vec<f64> = (0..2).map(|_| rng.gen::<f64>()).collect();
            let r = 1 + (rng.gen::<u32>() % 3) as i64;
            let all = homoclinic_cycles_at(s, r, &p)?;
            let pick = rng.gen_range(0..all.len());
            out.push(all[pick].cycle.clone());
        }
    } else {
        let basis: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        for i in 0..samples {
            let p: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            if i % 2 == 0 {
                let a = rng.gen_range(-1.0..1.0);
                let b = rng.gen_range(-1.0..1.0);
                out.push(rectangle(s, &p, a, b));
            } else {
                let n = &basis[rng.gen_range(0..d)];
                let m = &basis[rng.gen_range(0..d)];
                out.push(deck_commutator(s, &p, n, m)?);
            }
        }
    }
    Ok(out)
}

/// Evaluates `|PCF|` over [`probe_cycles`]; the verdict holds when every
/// cycle stays within `tol` plus its own tail bound.
pub fn trivial_pcf_test<O, D>(
    phi: &O,
    dynamics: &D,
    s: &SpectralSplitting,
    samples: usize,
    seed: u64,
    settings: PcfSettings,
) -> Result<TrivialPcfReport>
where
    O: Observable + ?Sized,
    D: LeafDynamics + ?Sized,
{
    let cycles = probe_cycles(s, samples, seed)?;
    let mut report = TrivialPcfReport {
        cycles_tested: cycles.len(),
        max_abs: 0.0,
        worst_tail_bound: 0.0,
        worst_cycle: None,
        verdict: true,
    };
    for cycle in cycles {
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
