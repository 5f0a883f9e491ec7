//! Diophantine data of rotation numbers and the circle-rotation
//! cohomological equation `w(t + alpha) - w(t) = psi(t) + c`.

mod alpha;

pub use alpha::{parse_alpha, Alpha, ContinuedFraction};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::BandLimitedFunction;

pub const DEFAULT_RESONANCE_THRESHOLD: f64 = 1e-10;
const NEGLIGIBLE_COEFFICIENT: f64 = 1e-14;
const RESONANCE_HIT: f64 = 1e-15;
const MAX_CF_DEPTH: usize = 400;

pub const ROTATION_CONVENTION: &str = "w(t + alpha) - w(t) = psi(t) + c; c = -mean(psi); mean(w) = 0";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauConstant {
    pub tau: f64,
    /// `min_{1 <= q <= q_max} q^tau dist(q alpha, Z)`.
    pub c: f64,
    pub argmin_q: i128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiophantineProfile {
    pub alpha: f64,
    pub alpha_exact: String,
    pub cf: Vec<i128>,
    pub convergents: Vec<(i128, i128)>,
    pub q_max: i128,
    pub empirical_c: Vec<TauConstant>,
}

impl DiophantineProfile {
    pub fn constant(&self, tau: f64) -> Option<f64> {
        self.empirical_c.iter().find(|t| t.tau == tau).map(|t| t.c)
    }

    pub fn denominators(&self) -> impl Iterator<Item = i128> + '_ {
        self.convergents.iter().map(|&(_, q)| q)
    }
}

/// Continued fraction through the first convergent beyond `q_max`, and the
/// empirical constants `C(tau)`. The minimum over `q <= q_max` is attained at
/// a convergent denominator, since those are the best approximations.
pub fn diophantine_profile(alpha: &Alpha, q_max: i128, taus: &[f64]) -> Result<DiophantineProfile> {
    if q_max < 2 {
        return Err(Error::Invalid(format!("q_max must be at least 2, got {q_max}")));
    }
    let cf = alpha.continued_fraction(q_max, MAX_CF_DEPTH)?;
    if cf.terminated {
        let (p, q) = *cf.convergents.last().expect("nonempty expansion");
        return Err(Error::RationalDetected { p, q, depth: cf.quotients.len() });
    }
    let mut empirical_c = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut best = TauConstant { tau, c: f64::INFINITY, argmin_q: 0 };
        for &(_, q) in &cf.convergents {
            if q > q_max || q < 1 {
                continue;
            }
            let v = (q as f64).powf(tau) * alpha.dist(q)?;
            if v < best.c {
                best.c = v;
                best.argmin_q = q;
            }
        }
        empirical_c.push(best);
    }
    Ok(DiophantineProfile {
        alpha: alpha.to_f64(),
        alpha_exact: alpha.to_string(),
        cf: cf.quotients,
        convergents: cf.convergents,
        q_max,
        empirical_c,
    })
}

/// Number of partial quotients seen before the expansion ends, up to
/// `depth`. Rational input ends early.
pub fn rationality_scan(alpha: &Alpha, depth: usize) -> Result<usize> {
    let cf = alpha.continued_fraction(i128::MAX, depth)?;
    if cf.terminated {
        let (p, q) = *cf.convergents.last().expect("nonempty expansion");
        return Err(Error::RationalDetected { p, q, depth: cf.quotients.len() });
    }
    Ok(cf.quotients.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArnoldSeries {
    pub epsilon: f64,
    pub l_max: u64,
    /// `(L', S(L'))` at every power of ten below `l_max`, then `l_max`.
    pub partial_sums: Vec<(u64, f64)>,
    pub total: f64,
    /// `S(l_max) - S(l_max / 10)`.
    pub cauchy_tail: f64,
    pub tail_ratio: f64,
    pub largest_tail_term: (u64, f64),
    pub spike_share: f64,
    pub spike_at_convergent: bool,
    /// Tail increment below 1% of the total.
    pub cauchy: bool,
}

/// `S(L) = sum_{l=1}^{L} 1 / (l^{1+eps} dist(l alpha, Z))`.
pub fn arnold_series(alpha: &Alpha, epsilon: f64, l_max: u64) -> Result<ArnoldSeries> {
    if !(epsilon > 0.0) {
        return Err(Error::Invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if l_max < 1 {
        return Err(Error::Invalid("L must be at least 1".into()));
    }
    let tail_start = l_max / 10;
    let mut sum = 0.0;
    let mut at_tail_start = 0.0;
    let mut partial = Vec::new();
    let mut next_decade = 10u64;
    let mut largest = (0u64, 0.0f64);
    for l in 1..=l_max {
        let d = alpha.dist(l as i128)?;
        if d < RESONANCE_HIT {
            return Err(Error::ResonanceHit(l));
        }
        let term = 1.0 / ((l as f64).powf(1.0 + epsilon) * d);
        sum += term;
        if l > tail_start && term > largest.1 {
            largest = (l, term);
        }
        if l == tail_start {
            at_tail_start = sum;
        }
        if l == next_decade && l < l_max {
            partial.push((l, sum));
            next_decade = next_decade.saturating_mul(10);
        }
    }
    partial.push((l_max, sum));
    let cauchy_tail = sum - at_tail_start;
    let tail_ratio = cauchy_tail / sum;
    let cf = alpha.continued_fraction(l_max as i128, MAX_CF_DEPTH)?;
    let spike_at_convergent = cf.convergents.iter().any(|&(_, q)| q == largest.0 as i128);
    Ok(ArnoldSeries {
        epsilon,
        l_max,
        partial_sums: partial,
        total: sum,
        cauchy_tail,
        tail_ratio,
        largest_tail_term: largest,
        spike_share: if cauchy_tail > 0.0 { largest.1 / cauchy_tail } else { 0.0 },
        spike_at_convergent,
        cauchy: tail_ratio < 0.01,
    })
}

/// `e^{2 pi i l alpha} - 1` from the exact residue of `l alpha`.
pub fn small_denominator(alpha: &Alpha, l: i64) -> Result<Complex64> {
    let r = alpha.signed_residue(l as i128)?;
    let s = (PI * r).sin();
    Ok(Complex64::new(-2.0 * s * s, (2.0 * PI * r).sin()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub amplitude: f64,
    /// `r` in `|c_l| ~ amplitude * l^{-r}`.
    pub exponent: f64,
}

/// Least-squares fit of `log |c_l|` against `log l` over nonzero modes.
pub fn decay_fit(modes: &[(i64, f64)]) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> =
        modes.iter().filter(|&&(l, a)| l > 0 && a > 0.0).map(|&(l, a)| ((l as f64).ln(), a.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(DecayFit { amplitude: (my - slope * mx).exp(), exponent: -slope })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotationMode {
    pub l: i64,
    pub psi: Complex64,
    pub denominator: Complex64,
    pub w: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotationSolveReport {
    pub alpha: f64,
    pub alpha_exact: String,
    pub convention: &'static str,
    pub c: f64,
    pub w: BandLimitedFunction,
    pub modes: Vec<RotationMode>,
    pub min_denominator: f64,
    pub resonance_threshold: f64,
    /// Modes below the threshold whose `psi` coefficient was negligible.
    pub resonance_flags: Vec<i64>,
    pub psi_decay_fit: Option<DecayFit>,
    pub coefficient_decay_fit: Option<DecayFit>,
    pub residual_sup: f64,
    pub residual_limit: f64,
    pub residual_ok: bool,
}

/// Fourier solution `w_l = psi_l / (e^{2 pi i l alpha} - 1)`, `w_0 = 0`.
pub fn solve_rotation(psi: &BandLimitedFunction, alpha: &Alpha, threshold: f64) -> Result<RotationSolveReport> {
    if psi.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: psi.dim() });
    }
    let c = -psi.mean();
    let mut modes = Vec::new();
    let mut flags = Vec::new();
    let mut min_den = f64::INFINITY;
    let mut half = Vec::new();
    for r in psi.records() {
        let l = r.k[0];
        if l == 0 {
            continue;
        }
        let p = Complex64::new(r.re, r.im);
        let den = small_denominator(alpha, l)?;
        min_den = min_den.min(den.norm());
        let w = if den.norm() < threshold {
            if p.norm() > NEGLIGIBLE_COEFFICIENT {
                return Err(Error::Resonance { l, denominator: den.norm(), coefficient: p.norm() });
            }
            flags.push(l);
            Complex64::new(0.0, 0.0)
        } else {
            p / den
        };
        modes.push(RotationMode { l, psi: p, denominator: den, w });
        half.push((vec![l], w));
    }
    let w = BandLimitedFunction::from_half(1, half)?;

    let a = alpha.to_f64();
    let n = (4 * w.cutoff() + 64).min(1 << 14);
    let mut residual_sup = 0.0f64;
    for j in 0..n {
        let t = j as f64 / n as f64;
        let r = w.evaluate(&[t + a]) - w.evaluate(&[t]) - psi.evaluate(&[t]) - c;
        residual_sup = residual_sup.max(r.abs());
    }
    let residual_limit = 1e-12 * w.coefficient_l1().max(1.0);
    let fit = |f: &dyn Fn(&RotationMode) -> f64| decay_fit(&modes.iter().map(|m| (m.l, f(m))).collect::<Vec<_>>());
    Ok(RotationSolveReport {
        alpha: a,
        alpha_exact: alpha.to_string(),
        convention: ROTATION_CONVENTION,
        c,
        psi_decay_fit: fit(&|m| m.psi.norm()),
        coefficient_decay_fit: fit(&|m| m.w.norm()),
        w,
        modes,
        min_denominator: min_den,
        resonance_threshold: threshold,
        resonance_flags: flags,
        residual_sup,
        residual_limit,
        residual_ok: residual_sup <= residual_limit,
    })
}

/// `|sum_{j<q} psi(t + j alpha) + q c - (w(t + q alpha) - w(t))|`, with the
/// shifts `j alpha` reduced exactly mod 1.
pub fn telescoping_defect(
    report: &RotationSolveReport,
    psi: &BandLimitedFunction,
    alpha: &Alpha,
    q: i128,
    t: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for j in 0..q {
        sum += psi.evaluate(&[t + alpha.signed_residue(j)?]);
    }
    let shifted = report.w.evaluate(&[t + alpha.signed_residue(q)?]);
    Ok((sum + q as f64 * report.c - (shifted - report.w.evaluate(&[t]))).abs())
}
