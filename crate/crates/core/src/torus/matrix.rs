use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square integer matrix of dimension 2 or 3, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<i64>>", into = "Vec<Vec<i64>>")]
pub struct IntMatrix {
    dim: usize,
    entries: Vec<i64>,
}

impl TryFrom<Vec<Vec<i64>>> for IntMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<i64>>) -> Result<Self> {
        IntMatrix::from_rows(&rows)
    }
}

impl From<IntMatrix> for Vec<Vec<i64>> {
    fn from(m: IntMatrix) -> Self {
        m.rows()
    }
}

impl IntMatrix {
    pub fn from_rows<R: AsRef<[i64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        if !(dim == 2 || dim == 3) || rows.iter().any(|r| r.as_ref().len() != dim) {
            let shape: Vec<usize> = rows.iter().map(|r| r.as_ref().len()).collect();
            return Err(Error::BadDimension(format!("{dim} rows of lengths {shape:?}")));
        }
        let entries = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Ok(IntMatrix { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1;
        }
        IntMatrix { dim, entries }
    }

    /// Parses a JSON array of integer rows.
    pub fn from_json(text: &str) -> Result<Self> {
        let rows: Vec<Vec<i64>> =
            serde_json::from_str(text).map_err(|e| Error::Parse { what: "matrix", detail: e.to_string() })?;
        Self::from_rows(&rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<i64>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let d = self.dim;
        let mut entries = vec![0; d * d];
        for i in 0..d {
            for j in 0..d {
                entries[j * d + i] = self.get(i, j);
            }
        }
        IntMatrix { dim: d, entries }
    }

    pub fn det(&self) -> i128 {
        let g = |i, j| self.get(i, j) as i128;
        match self.dim {
            2 => g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0),
            _ => {
                g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1)) - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
                    + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0))
            }
        }
    }

    pub fn trace(&self) -> i128 {
        (0..self.dim).map(|i| self.get(i, i) as i128).sum()
    }

    /// Sum of principal 2x2 minors (the middle coefficient of the 3d
    /// characteristic polynomial).
    pub fn principal_minor_sum(&self) -> i128 {
        let g = |i, j| self.get(i, j) as i128;
        match self.dim {
            2 => self.det(),
            _ => {
                (g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0))
                    + (g(0, 0) * g(2, 2) - g(0, 2) * g(2, 0))
                    + (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
            }
        }
    }

    /// Adjugate matrix, so that `self * adj = det * I`.
    pub fn adjugate(&self) -> Vec<i128> {
        let d = self.dim;
        let g = |i: usize, j: usize| self.get(i, j) as i128;
        let mut adj = vec![0i128; d * d];
        match d {
            2 => {
                adj[0] = g(1, 1);
                adj[1] = -g(0, 1);
                adj[2] = -g(1, 0);
                adj[3] = g(0, 0);
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        // cofactor C_ji goes to adj[i][j]
                        let (r0, r1) = others(j);
                        let (c0, c1) = others(i);
                        let minor = g(r0, c0) * g(r1, c1) - g(r0, c1) * g(r1, c0);
                        let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
                        adj[i * 3 + j] = sign * minor;
                    }
                }
            }
        }
        adj
    }

    pub fn is_automorphism(&self) -> bool {
        self.det().abs() == 1
    }

    pub fn require_automorphism(&self) -> Result<()> {
        if self.is_automorphism() {
            Ok(())
        } else {
            Err(Error::NotAutomorphism(self.det()))
        }
    }

    /// Integer inverse of an automorphism.
    pub fn inverse(&self) -> Result<Self> {
        self.require_automorphism()?;
        let det = self.det();
        let entries = self
            .adjugate()
            .into_iter()
            .map(|a| i64::try_from(a * det).map_err(|_| Error::Overflow("inverse")))
            .collect::<Result<Vec<_>>>()?;
        Ok(IntMatrix { dim: self.dim, entries })
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let d = self.dim;
        let mut entries = vec![0i64; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut acc: i64 = 0;
                for k in 0..d {
                    let p = self.get(i, k).checked_mul(other.get(k, j)).ok_or(Error::Overflow("matrix product"))?;
                    acc = acc.checked_add(p).ok_or(Error::Overflow("matrix product"))?;
                }
                entries[i * d + j] = acc;
            }
        }
        Ok(IntMatrix { dim: d, entries })
    }

    pub fn checked_pow(&self, n: u32) -> Result<Self> {
        let mut result = IntMatrix::identity(self.dim);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.checked_mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.checked_mul(&base)?;
            }
        }
        Ok(result)
    }

    /// Signed integer power; negative exponents use the integer inverse.
    pub fn checked_pow_signed(&self, n: i64) -> Result<Self> {
        let e = u32::try_from(n.unsigned_abs()).map_err(|_| Error::Overflow("matrix power"))?;
        if n >= 0 {
            self.checked_pow(e)
        } else {
            self.inverse()?.checked_pow(e)
        }
    }

    pub fn minus_identity(&self) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            m.entries[i * self.dim + i] -= 1;
        }
        m
    }

    pub fn apply_f64(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|i| (0..d).map(|j| self.get(i, j) as f64 * x[j]).sum()).collect()
    }

    pub fn apply_i64(&self, k: &[i64]) -> Vec<i64> {
        let d = self.dim;
        (0..d).map(|i| (0..d).map(|j| self.get(i, j) * k[j]).sum()).collect()
    }

    pub fn apply_i128(&self, k: &[i128]) -> Vec<i128> {
        let d = self.dim;
        (0..d).map(|i| (0..d).map(|j| self.get(i, j) as i128 * k[j]).sum()).collect()
    }

    /// Frobenius norm, an upper bound for the operator 2-norm.
    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|&e| (e as f64).powi(2)).sum::<f64>().sqrt()
    }

    /// Lower-triangular Hermite basis `H` of the lattice spanned by the
    /// columns, with positive diagonal. `prod H_ii = |det|`.
    pub fn column_hermite_form(&self) -> Result<Vec<i128>> {
        let d = self.dim;
        let mut h: Vec<i128> = self.entries.iter().map(|&e| e as i128).collect();
        let at = |i: usize, j: usize| i * d + j;
        for row in 0..d {
            // clear entries right of the pivot using column gcd steps
            for col in (row + 1)..d {
                let a = h[at(row, row)];
                let b = h[at(row, col)];
                if b == 0 {
                    continue;
                }
                let (g, x, y) = ext_gcd(a, b);
                let (p, q) = (a / g, b / g);
                for r in 0..d {
                    let u = h[at(r, row)];
                    let v = h[at(r, col)];
                    h[at(r, row)] = x * u + y * v;
                    h[at(r, col)] = -q * u + p * v;
                }
            }
            if h[at(row, row)] == 0 {
                return Err(Error::SingularSystem);
            }
            if h[at(row, row)] < 0 {
                for r in 0..d {
                    h[at(r, row)] = -h[at(r, row)];
                }
            }
        }
        Ok(h)
    }
}

fn others(i: usize) -> (usize, usize) {
    match i {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Extended gcd: returns `(g, x, y)` with `a x + b y = g > 0`.
fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}
