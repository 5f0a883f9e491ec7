use serde::{Deserialize, Serialize};

use super::IntMatrix;
use crate::error::{Error, Result};

const UNIT_MODULUS_TOL: f64 = 1e-10;
const REPEAT_TOL: f64 = 1e-10;
const EIGEN_RESIDUAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplittingClass {
    NotHyperbolic,
    #[serde(rename = "anosov-2d")]
    Anosov2d,
    #[serde(rename = "anosov-3d-ph-expanding-center")]
    Anosov3dPhExpandingCenter,
    #[serde(rename = "anosov-3d-ph-contracting-center")]
    Anosov3dPhContractingCenter,
    Other,
}

impl SplittingClass {
    pub fn is_partially_hyperbolic(self) -> bool {
        matches!(self, SplittingClass::Anosov3dPhExpandingCenter | SplittingClass::Anosov3dPhContractingCenter)
    }
}

/// Eigen-data of an integer automorphism with real simple spectrum.
///
/// Eigenvalues are sorted by modulus; eigenvectors are unit vectors whose
/// first non-negligible coordinate is positive. `duals[i]` is the row of the
/// inverse eigenvector matrix, so the coefficient of `w` along `eigenvectors[i]`
/// is `duals[i] . w`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralSplitting {
    pub matrix: IntMatrix,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub duals: Vec<Vec<f64>>,
    pub class: SplittingClass,
    pub lambda_s: f64,
    pub lambda_c: Option<f64>,
    pub lambda_u: f64,
}

/// Components of a vector along the invariant lines.
#[derive(Debug, Clone, PartialEq)]
pub struct SuComponents {
    pub stable: Vec<f64>,
    pub center: Option<Vec<f64>>,
    pub unstable: Vec<f64>,
}

impl SuComponents {
    pub fn recombine(&self) -> Vec<f64> {
        let mut out = self.stable.clone();
        for (o, u) in out.iter_mut().zip(&self.unstable) {
            *o += u;
        }
        if let Some(c) = &self.center {
            for (o, v) in out.iter_mut().zip(c) {
                *o += v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BunchingReport {
    pub r: f64,
    pub r_bunched: bool,
    pub strongly_r_bunched: bool,
}

pub fn spectral_splitting(m: &IntMatrix) -> Result<SpectralSplitting> {
    m.require_automorphism()?;
    let mut eigenvalues = real_roots(m)?;
    eigenvalues.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

    if eigenvalues.iter().any(|l| (l.abs() - 1.0).abs() < UNIT_MODULUS_TOL) {
        return Ok(SpectralSplitting {
            matrix: m.clone(),
            lambda_s: eigenvalues[0].abs(),
            lambda_c: None,
            lambda_u: eigenvalues[eigenvalues.len() - 1].abs(),
            eigenvalues,
            eigenvectors: Vec::new(),
            duals: Vec::new(),
            class: SplittingClass::NotHyperbolic,
        });
    }
    for w in eigenvalues.windows(2) {
        if (w[0] - w[1]).abs() < REPEAT_TOL {
            return Err(Error::RepeatedEigenvalue(w[0]));
        }
    }

    let d = m.dim();
    let mt = m.transpose();
    let mut eigenvectors = Vec::with_capacity(d);
    let mut duals = Vec::with_capacity(d);
    for &lambda in &eigenvalues {
        let v = null_vector(m, lambda);
        let l = null_vector(&mt, lambda);
        let res = residual(m, &v, lambda);
        if res > EIGEN_RESIDUAL_TOL {
            return Err(Error::Invalid(format!("eigenvector residual {res:e} for eigenvalue {lambda}")));
        }
        let scale = dot(&l, &v);
        duals.push(l.iter().map(|x| x / scale).collect());
        eigenvectors.push(v);
    }

    let moduli: Vec<f64> = eigenvalues.iter().map(|l| l.abs()).collect();
    let (class, lambda_c) = match d {
        2 => (SplittingClass::Anosov2d, None),
        _ => {
            let distinct = moduli[0] < moduli[1] - REPEAT_TOL && moduli[1] < moduli[2] - REPEAT_TOL;
            if !distinct {
                (SplittingClass::Other, None)
            } else if moduli[1] > 1.0 {
                (SplittingClass::Anosov3dPhExpandingCenter, Some(moduli[1]))
            } else {
                (SplittingClass::Anosov3dPhContractingCenter, Some(moduli[1]))
            }
        }
    };
    Ok(SpectralSplitting {
        matrix: m.clone(),
        lambda_s: moduli[0],
        lambda_c,
        lambda_u: moduli[d - 1],
        eigenvalues,
        eigenvectors,
        duals,
        class,
    })
}

impl SpectralSplitting {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn has_vectors(&self) -> bool {
        !self.eigenvectors.is_empty()
    }

    fn index_of(&self, line: Line) -> Option<usize> {
        let d = self.dim();
        match line {
            Line::Stable => Some(0),
            Line::Unstable => Some(d - 1),
            Line::Center if d == 3 => Some(1),
            Line::Center => None,
        }
    }

    /// Signed eigenvalue of the given invariant line.
    pub fn eigenvalue(&self, line: Line) -> Option<f64> {
        self.index_of(line).map(|i| self.eigenvalues[i])
    }

    pub fn eigenvector(&self, line: Line) -> Option<&[f64]> {
        self.index_of(line).and_then(|i| self.eigenvectors.get(i).map(Vec::as_slice))
    }

    pub fn dual(&self, line: Line) -> Option<&[f64]> {
        self.index_of(line).and_then(|i| self.duals.get(i).map(Vec::as_slice))
    }

    /// Coefficient of `w` along the eigenvector of `line`.
    pub fn coefficient(&self, line: Line, w: &[f64]) -> f64 {
        self.dual(line).map_or(0.0, |d| dot(d, w))
    }

    pub fn component(&self, line: Line, w: &[f64]) -> Vec<f64> {
        match self.eigenvector(line) {
            Some(v) => {
                let a = self.coefficient(line, w);
                v.iter().map(|x| a * x).collect()
            }
            None => vec![0.0; w.len()],
        }
    }

    /// Splits `w = w_s + w_c + w_u` along the invariant lines.
    pub fn su_decompose(&self, w: &[f64]) -> Result<SuComponents> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: w.len() });
        }
        if !self.has_vectors() {
            return Err(Error::NotHyperbolic);
        }
        Ok(SuComponents {
            stable: self.component(Line::Stable, w),
            center: (self.dim() == 3).then(|| self.component(Line::Center, w)),
            unstable: self.component(Line::Unstable, w),
        })
    }

    /// Evaluates the bunching inequalities with norms and co-norms replaced
    /// by eigenvalue moduli.
    pub fn bunching_report(&self, r: f64) -> Result<BunchingReport> {
        let c = match (self.class.is_partially_hyperbolic(), self.lambda_c) {
            (true, Some(c)) => c,
            _ => return Err(Error::NotPartiallyHyperbolic),
        };
        let (s, u) = (self.lambda_s, self.lambda_u);
        let cr = c.powf(r);
        let r_bunched = s < cr && cr < u && s < c * c.powf(-r) && u > c * c.powf(-r);
        let strongly_r_bunched = s.max(1.0 / u) < cr.min(c.powf(-r));
        Ok(BunchingReport { r, r_bunched, strongly_r_bunched })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Line {
    Stable,
    Center,
    Unstable,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual(m: &IntMatrix, v: &[f64], lambda: f64) -> f64 {
    let mv = m.apply_f64(v);
    mv.iter().zip(v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt()
}

/// Real roots of the characteristic polynomial, Newton-polished.
fn real_roots(m: &IntMatrix) -> Result<Vec<f64>> {
    let tr = m.trace() as f64;
    let det = m.det() as f64;
    match m.dim() {
        2 => {
            // l^2 - tr l + det
            let disc = tr * tr - 4.0 * det;
            if disc < -1e-12 {
                return Err(Error::ComplexSpectrum);
            }
            let sq = disc.max(0.0).sqrt();
            let big = if tr >= 0.0 { (tr + sq) / 2.0 } else { (tr - sq) / 2.0 };
            let small = if big != 0.0 { det / big } else { (tr - sq) / 2.0 };
            let poly = |l: f64| (l * l - tr * l + det, 2.0 * l - tr);
            Ok(vec![polish(big, poly), polish(small, poly)])
        }
        _ => {
            // l^3 + a l^2 + b l + c
            let a = -tr;
            let b = m.principal_minor_sum() as f64;
            let c = -det;
            let poly = |l: f64| (((l + a) * l + b) * l + c, (3.0 * l + 2.0 * a) * l + b);
            let p = b - a * a / 3.0;
            let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
            let disc = -(4.0 * p * p * p + 27.0 * q * q);
            if disc < -1e-9 {
                return Err(Error::ComplexSpectrum);
            }
            let roots: Vec<f64> = if p.abs() < 1e-300 {
                vec![-a / 3.0; 3]
            } else {
                let rad = 2.0 * (-p / 3.0).sqrt();
                let arg = ((3.0 * q / (p * rad)).clamp(-1.0, 1.0)).acos() / 3.0;
                (0..3).map(|k| rad * (arg - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - a / 3.0).collect()
            };
            Ok(roots.into_iter().map(|r| polish(r, poly)).collect())
        }
    }
}

fn polish(mut x: f64, poly: impl Fn(f64) -> (f64, f64)) -> f64 {
    for _ in 0..8 {
        let (f, df) = poly(x);
        if df == 0.0 {
            break;
        }
        let step = f / df;
        x -= step;
        if step.abs() <= 1e-17 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Unit null vector of `m - lambda I`, oriented with the first
/// non-negligible coordinate positive.
fn null_vector(m: &IntMatrix, lambda: f64) -> Vec<f64> {
    let d = m.dim();
    let row =
        |i: usize| -> Vec<f64> { (0..d).map(|j| m.get(i, j) as f64 - if i == j { lambda } else { 0.0 }).collect() };
    let mut v = match d {
        2 => {
            let (r0, r1) = (row(0), row(1));
            let a = vec![-r0[1], r0[0]];
            let b = vec![-r1[1], r1[0]];
            if norm(&a) >= norm(&b) {
                a
            } else {
                b
            }
        }
        _ => {
            let rows = [row(0), row(1), row(2)];
            let mut best = vec![0.0; 3];
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let c = cross(&rows[i], &rows[j]);
                if norm(&c) > norm(&best) {
                    best = c;
                }
            }
            best
        }
    };
    let n = norm(&v);
    for x in v.iter_mut() {
        *x /= n;
    }
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
    }
    v
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
