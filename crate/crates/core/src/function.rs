//! Real trigonometric polynomials on `T^d` and their grid samples.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_indexed, Workers};
use crate::torus::IntMatrix;

const TWO_PI: f64 = 2.0 * PI;
/// Largest per-axis frequency served by the power-table evaluator.
const TABLE_MAX: usize = 20;
const REALITY_TOL: f64 = 1e-12;

/// One stored Fourier mode; `k` is padded with zeros beyond `dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Mode {
    k: [i64; 3],
    c: Complex64,
}

/// `Mode` unpacked for the table evaluator.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PackedMode {
    idx: [usize; 3],
    sgn: [f64; 3],
    re: f64,
    im: f64,
}

/// `phi(x) = sum_k c_k e^{2 pi i k.x}` with `c_{-k} = conj(c_k)`.
///
/// Only the constant term and the modes with lexicographically positive `k`
/// are stored; the mirror half is implied, so evaluation is real by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLimitedFunction {
    dim: usize,
    constant: f64,
    modes: Vec<Mode>,
    packed: Vec<PackedMode>,
    max_freq: [usize; 3],
}

/// JSON form of one stored coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub k: [i64; 3],
    pub re: f64,
    pub im: f64,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    k: Vec<i64>,
    re: f64,
    #[serde(default)]
    im: f64,
}

fn is_positive(k: &[i64]) -> bool {
    k.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0)
}

fn pad(k: &[i64]) -> [i64; 3] {
    let mut out = [0; 3];
    out[..k.len()].copy_from_slice(k);
    out
}

impl BandLimitedFunction {
    pub fn zero(dim: usize) -> Self {
        Self::constant(dim, 0.0)
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        assert!((1..=3).contains(&dim), "dimension must be 1, 2 or 3");
        BandLimitedFunction { dim, constant: value, modes: Vec::new(), packed: Vec::new(), max_freq: [0; 3] }
    }

    /// Builds from positive-half coefficients; the mirror `-k` is implied.
    /// `k = 0` entries must be real.
    pub fn from_half<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i64>, Complex64)>,
    {
        let mut f = Self::zero(dim);
        let mut acc: BTreeMap<[i64; 3], Complex64> = BTreeMap::new();
        for (k, c) in terms {
            if k.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: k.len() });
            }
            if k.iter().all(|&x| x == 0) {
                if c.im.abs() > REALITY_TOL {
                    return Err(Error::RealityViolation(c.im.abs()));
                }
                f.constant += c.re;
            } else if is_positive(&k) {
                *acc.entry(pad(&k)).or_default() += c;
            } else {
                return Err(Error::Invalid(format!(
                    "frequency {k:?} is not in the stored half (leading entry must be positive)"
                )));
            }
        }
        f.set_modes(acc);
        Ok(f)
    }

    /// Builds from a full coefficient map, checking `c_{-k} = conj(c_k)`.
    pub fn from_coeffs<I>(dim: usize, coeffs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i64>, Complex64)>,
    {
        let mut full: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        for (k, c) in coeffs {
            if k.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: k.len() });
            }
            *full.entry(k).or_default() += c;
        }
        let mut half = Vec::new();
        for (k, &c) in &full {
            if k.iter().all(|&x| x == 0) {
                if c.im.abs() > REALITY_TOL {
                    return Err(Error::RealityViolation(c.im.abs()));
                }
                half.push((k.clone(), c));
                continue;
            }
            let neg: Vec<i64> = k.iter().map(|x| -x).collect();
            let mirror = full.get(&neg).copied().unwrap_or_default();
            let residue = (mirror - c.conj()).norm();
            if residue > REALITY_TOL * (1.0 + c.norm()) {
                return Err(Error::RealityViolation(residue));
            }
            if is_positive(k) {
                half.push((k.clone(), c));
            }
        }
        Self::from_half(dim, half)
    }

    /// `amp * cos(2 pi k.x)`.
    pub fn cosine(k: &[i64], amp: f64) -> Self {
        Self::single(k, Complex64::new(amp / 2.0, 0.0))
    }

    /// `amp * sin(2 pi k.x)`.
    pub fn sine(k: &[i64], amp: f64) -> Self {
        Self::single(k, Complex64::new(0.0, -amp / 2.0))
    }

    fn single(k: &[i64], c: Complex64) -> Self {
        let dim = k.len();
        if k.iter().all(|&x| x == 0) {
            return Self::constant(dim, 2.0 * c.re);
        }
        let (k, c) = if is_positive(k) { (k.to_vec(), c) } else { (k.iter().map(|x| -x).collect(), c.conj()) };
        Self::from_half(dim, [(k, c)]).expect("single mode is well formed")
    }

    fn set_modes(&mut self, acc: BTreeMap<[i64; 3], Complex64>) {
        self.modes =
            acc.into_iter().filter(|(_, c)| *c != Complex64::new(0.0, 0.0)).map(|(k, c)| Mode { k, c }).collect();
        self.packed = self
            .modes
            .iter()
            .map(|m| PackedMode {
                idx: m.k.map(|k| k.unsigned_abs() as usize),
                sgn: m.k.map(|k| k.signum() as f64),
                re: m.c.re,
                im: m.c.im,
            })
            .collect();
        self.max_freq = [0; 3];
        for m in &self.modes {
            for (mf, &k) in self.max_freq.iter_mut().zip(&m.k) {
                *mf = (*mf).max(k.unsigned_abs() as usize);
            }
        }
    }

    fn to_map(&self) -> BTreeMap<[i64; 3], Complex64> {
        self.modes.iter().map(|m| (m.k, m.c)).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Max `|k|_inf` over stored modes.
    pub fn cutoff(&self) -> usize {
        self.max_freq.iter().copied().max().unwrap_or(0)
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn is_constant(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.constant
    }

    /// Coefficient `c_k` for any `k` (mirror half included).
    pub fn coefficient(&self, k: &[i64]) -> Complex64 {
        if k.iter().all(|&x| x == 0) {
            return Complex64::new(self.constant, 0.0);
        }
        let (key, conj) =
            if is_positive(k) { (pad(k), false) } else { (pad(&k.iter().map(|x| -x).collect::<Vec<_>>()), true) };
        match self.modes.binary_search_by(|m| m.k.cmp(&key)) {
            Ok(i) if conj => self.modes[i].c.conj(),
            Ok(i) => self.modes[i].c,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Stored half as records (constant first when nonzero).
    pub fn records(&self) -> Vec<CoefficientRecord> {
        let mut out = Vec::with_capacity(self.modes.len() + 1);
        if self.constant != 0.0 {
            out.push(CoefficientRecord { k: [0; 3], re: self.constant, im: 0.0 });
        }
        out.extend(self.modes.iter().map(|m| CoefficientRecord { k: m.k, re: m.c.re, im: m.c.im }));
        out
    }

    /// `Lip(phi) <= 2 pi sum_k |k|_2 |c_k|`, summed over both halves.
    pub fn lipschitz(&self) -> f64 {
        2.0 * TWO_PI
            * self
                .modes
                .iter()
                .map(|m| {
                    let k2: f64 = m.k.iter().map(|&x| (x as f64).powi(2)).sum();
                    k2.sqrt() * m.c.norm()
                })
                .sum::<f64>()
    }

    /// `sum_k |c_k|^2` over both halves.
    pub fn l2_norm_squared(&self) -> f64 {
        self.constant * self.constant + 2.0 * self.modes.iter().map(|m| m.c.norm_sqr()).sum::<f64>()
    }

    /// `sum_k |c_k|`, an upper bound for the sup norm.
    pub fn coefficient_l1(&self) -> f64 {
        self.constant.abs() + 2.0 * self.modes.iter().map(|m| m.c.norm()).sum::<f64>()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        if self.modes.is_empty() {
            return self.constant;
        }
        if self.max_freq.iter().all(|&m| m <= TABLE_MAX) {
            self.evaluate_table(x)
        } else {
            self.evaluate_direct(x)
        }
    }

    /// Checked evaluation: compares against the full (both halves) complex
    /// sum and rejects an imaginary residue above `1e-9`.
    pub fn evaluate_checked(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut z = Complex64::new(self.constant, 0.0);
        for m in &self.modes {
            let phase: f64 = (0..self.dim).map(|j| m.k[j] as f64 * x[j]).sum::<f64>() * TWO_PI;
            let e = Complex64::from_polar(1.0, phase);
            z += m.c * e + m.c.conj() * e.conj();
        }
        if z.im.abs() > 1e-9 {
            return Err(Error::RealityViolation(z.im.abs()));
        }
        Ok(self.evaluate(x))
    }

    fn evaluate_direct(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for m in &self.modes {
            let phase: f64 = (0..self.dim).map(|j| m.k[j] as f64 * x[j]).sum::<f64>() * TWO_PI;
            let (s, c) = phase.sin_cos();
            acc += m.c.re * c - m.c.im * s;
        }
        self.constant + 2.0 * acc
    }

    fn evaluate_table(&self, x: &[f64]) -> f64 {
        match self.dim {
            1 => self.evaluate_table_dims::<1>(x),
            2 => self.evaluate_table_dims::<2>(x),
            _ => self.evaluate_table_dims::<3>(x),
        }
    }

    /// Powers `e^{2 pi i m x_j}` for `0 <= m <= max_freq[j]`; negative
    /// frequencies are read as conjugates.
    fn evaluate_table_dims<const D: usize>(&self, x: &[f64]) -> f64 {
        let one = Complex64::new(1.0, 0.0);
        let mut pos = [[one; TABLE_MAX + 1]; D];
        for j in 0..D {
            let kmax = self.max_freq[j];
            if kmax == 0 {
                continue;
            }
            let frac = x[j] - x[j].floor();
            let (s, c) = (TWO_PI * frac).sin_cos();
            let base = Complex64::new(c, s);
            let row = &mut pos[j];
            for m in 1..=kmax {
                row[m] = row[m - 1] * base;
            }
        }
        let mut acc = 0.0;
        for m in &self.packed {
            let t = pos[0][m.idx[0]];
            let (mut re, mut im) = (t.re, t.im);
            for j in 1..D {
                let t = pos[j][m.idx[j]];
                let ti = t.im * m.sgn[j];
                (re, im) = (re * t.re - im * ti, re * ti + im * t.re);
            }
            acc += m.re * re - m.im * im;
        }
        self.constant + 2.0 * acc
    }

    /// `sup |d/dt phi(x + t v)| <= 2 pi sum_k |k.v| |c_k|` over both halves.
    pub fn lipschitz_along(&self, v: &[f64]) -> f64 {
        2.0 * TWO_PI
            * self
                .modes
                .iter()
                .map(|m| {
                    let kv: f64 = (0..self.dim).map(|j| m.k[j] as f64 * v[j]).sum();
                    kv.abs() * m.c.norm()
                })
                .sum::<f64>()
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in function arithmetic");
        let mut acc = self.to_map();
        for m in &other.modes {
            *acc.entry(m.k).or_default() += m.c * sign;
        }
        let mut out = Self::constant(self.dim, self.constant + sign * other.constant);
        out.set_modes(acc);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, -1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::constant(self.dim, self.constant * s);
        out.set_modes(self.modes.iter().map(|m| (m.k, m.c * s)).collect());
        out
    }

    pub fn add_constant(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.constant += c;
        out
    }

    /// `x -> phi(x + shift)`: coefficients pick up `e^{2 pi i k.shift}`.
    pub fn translate(&self, shift: &[f64]) -> Self {
        let mut out = Self::constant(self.dim, self.constant);
        out.set_modes(
            self.modes
                .iter()
                .map(|m| {
                    let phase: f64 = (0..self.dim).map(|j| m.k[j] as f64 * shift[j]).sum();
                    (m.k, m.c * Complex64::from_polar(1.0, TWO_PI * phase))
                })
                .collect(),
        );
        out
    }

    /// `phi o M`: the coefficient of `k` moves to `M^T k`.
    pub fn compose_with_automorphism(&self, m: &IntMatrix) -> Result<Self> {
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: m.dim() });
        }
        let mt = m.transpose();
        let mut acc: BTreeMap<[i64; 3], Complex64> = BTreeMap::new();
        for mode in &self.modes {
            let k = mt.apply_i64(&mode.k[..self.dim]);
            if k.iter().all(|&x| x == 0) {
                return Err(Error::Invalid("composition with a singular matrix".into()));
            }
            let (key, c) = if is_positive(&k) {
                (pad(&k), mode.c)
            } else {
                (pad(&k.iter().map(|x| -x).collect::<Vec<_>>()), mode.c.conj())
            };
            *acc.entry(key).or_default() += c;
        }
        let mut out = Self::constant(self.dim, self.constant);
        out.set_modes(acc);
        Ok(out)
    }

    /// Synthesizes the coboundary `u o M - u + c`.
    pub fn coboundary(u: &Self, m: &IntMatrix, c: f64) -> Result<Self> {
        Ok(u.compose_with_automorphism(m)?.sub(u).add_constant(c))
    }

    /// Grid maximum of `|phi|` followed by a local pattern-search refinement
    /// around the best grid points; the result is a lower bound of the sup.
    pub fn sup_norm(&self, n: usize) -> f64 {
        if self.modes.is_empty() {
            return self.constant.abs();
        }
        let grid = GridFunction::sample(self, n, Workers::SEQUENTIAL);
        let mut idx: Vec<usize> = (0..grid.samples.len()).collect();
        idx.sort_by(|&a, &b| grid.samples[b].abs().total_cmp(&grid.samples[a].abs()));
        let mut best = grid.samples[idx[0]].abs();
        for &i in idx.iter().take(8) {
            let mut x = grid.point(i);
            let mut val = self.evaluate(&x).abs();
            let mut h = 0.5 / n as f64;
            while h > 1e-12 {
                let mut improved = false;
                for j in 0..self.dim {
                    for dir in [-1.0, 1.0] {
                        let mut y = x.clone();
                        y[j] += dir * h;
                        let v = self.evaluate(&y).abs();
                        if v > val {
                            val = v;
                            x = y;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    h *= 0.5;
                }
            }
            best = best.max(val);
        }
        best
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Parses `[{"k": [...], "re": .., "im": ..}, ...]` (positive half plus
    /// an optional `k = 0` entry).
    pub fn from_json(dim: usize, text: &str) -> Result<Self> {
        let terms: Vec<TermJson> =
            serde_json::from_str(text).map_err(|e| Error::Parse { what: "function", detail: e.to_string() })?;
        Self::from_half(dim, terms.into_iter().map(|t| (t.k, Complex64::new(t.re, t.im))))
    }

    /// Dimension of a JSON function file, taken from its first term.
    pub fn json_dim(text: &str) -> Result<Option<usize>> {
        let terms: Vec<TermJson> =
            serde_json::from_str(text).map_err(|e| Error::Parse { what: "function", detail: e.to_string() })?;
        Ok(terms.first().map(|t| t.k.len()))
    }
}

impl Serialize for BandLimitedFunction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let terms: Vec<TermJson> =
            self.records().into_iter().map(|r| TermJson { k: r.k[..self.dim].to_vec(), re: r.re, im: r.im }).collect();
        terms.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BandLimitedFunction {
    /// Dimension comes from the first term; an empty list is the zero
    /// function on `T^1`.
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let terms = Vec::<TermJson>::deserialize(deserializer)?;
        let dim = terms.first().map_or(1, |t| t.k.len());
        Self::from_half(dim, terms.into_iter().map(|t| (t.k, Complex64::new(t.re, t.im))))
            .map_err(serde::de::Error::custom)
    }
}

/// Samples on the uniform grid `j / n`, `j in {0..n-1}^d`, first axis slowest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridFunction {
    pub dim: usize,
    pub n: usize,
    pub samples: Vec<f64>,
}

impl GridFunction {
    pub fn from_fn<F>(dim: usize, n: usize, workers: Workers, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let total = n.pow(dim as u32);
        let samples = map_indexed(total, workers, |i| f(&grid_point(dim, n, i)));
        GridFunction { dim, n, samples }
    }

    pub fn sample(phi: &BandLimitedFunction, n: usize, workers: Workers) -> Self {
        Self::from_fn(phi.dim(), n, workers, |x| phi.evaluate(x))
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        grid_point(self.dim, self.n, i)
    }

    pub fn multi_index(&self, i: usize) -> Vec<usize> {
        grid_multi_index(self.dim, self.n, i)
    }

    pub fn flat_index(&self, j: &[usize]) -> usize {
        j.iter().fold(0, |acc, &x| acc * self.n + x)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn sup_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Coefficients with `|k|_inf <= cutoff` recovered by FFT. Exact (to
    /// rounding) for band-limited samples when `n > 2 cutoff`.
    pub fn dft(&self, cutoff: usize) -> Result<BandLimitedFunction> {
        if self.n <= 2 * cutoff {
            return Err(Error::AliasingRisk { n: self.n, cutoff });
        }
        let n = self.n;
        let mut buf: Vec<Complex64> = self.samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let fft = FftPlanner::new().plan_fft_forward(n);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let total = buf.len();
            for start in 0..total {
                // start indices have zero coordinate along `axis`
                if !(start / stride).is_multiple_of(n) {
                    continue;
                }
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = buf[start + t * stride];
                }
                fft.process(&mut line);
                for (t, v) in line.iter().enumerate() {
                    buf[start + t * stride] = *v;
                }
            }
        }
        let norm = 1.0 / buf.len() as f64;
        let c = cutoff as i64;
        let mut terms = Vec::new();
        let mut k = vec![-c; self.dim];
        loop {
            if k.iter().all(|&x| x == 0) || is_positive(&k) {
                let idx = k.iter().fold(0usize, |acc, &x| acc * n + x.rem_euclid(n as i64) as usize);
                let mut coef = buf[idx] * norm;
                if k.iter().all(|&x| x == 0) {
                    coef.im = 0.0;
                }
                terms.push((k.clone(), coef));
            }
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return BandLimitedFunction::from_half(self.dim, terms);
                }
                axis -= 1;
                k[axis] += 1;
                if k[axis] <= c {
                    break;
                }
                k[axis] = -c;
            }
        }
    }
}

pub(crate) fn grid_multi_index(dim: usize, n: usize, mut i: usize) -> Vec<usize> {
    let mut j = vec![0; dim];
    for axis in (0..dim).rev() {
        j[axis] = i % n;
        i /= n;
    }
    j
}

pub(crate) fn grid_point(dim: usize, n: usize, i: usize) -> Vec<f64> {
    grid_multi_index(dim, n, i).into_iter().map(|j| j as f64 / n as f64).collect()
}
