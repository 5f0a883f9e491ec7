use serde::{Deserialize, Serialize};

use super::{IntMatrix, TorusPoint};
use crate::error::{Error, Result};

pub const DEFAULT_POINT_CAP: u128 = 2_000_000;

/// A torus point with rational coordinates `num / den`, `0 <= num_i < den`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RationalPoint {
    pub num: Vec<i128>,
    pub den: i128,
}

impl RationalPoint {
    pub fn to_point(&self) -> TorusPoint {
        TorusPoint::new(self.num.iter().map(|&n| n as f64 / self.den as f64).collect())
    }

    /// Exact image under an integer matrix, reduced mod Z^d.
    pub fn apply(&self, m: &IntMatrix) -> RationalPoint {
        let num = m.apply_i128(&self.num).into_iter().map(|n| n.rem_euclid(self.den)).collect();
        RationalPoint { num, den: self.den }
    }
}

/// Every solution of `M^n x = x (mod Z^d)`, exactly `|det(M^n - I)|` points.
pub fn periodic_points(m: &IntMatrix, n: u32) -> Result<Vec<TorusPoint>> {
    Ok(periodic_points_exact(m, n, DEFAULT_POINT_CAP)?.iter().map(RationalPoint::to_point).collect())
}

/// Exact enumeration: `x = (M^n - I)^{-1} m` with `m` running over the
/// coset representatives `0 <= m_i < H_ii` of the column Hermite basis `H`.
pub fn periodic_points_exact(m: &IntMatrix, n: u32, cap: u128) -> Result<Vec<RationalPoint>> {
    if n == 0 {
        return Err(Error::SingularSystem);
    }
    let p = m.checked_pow(n)?.minus_identity();
    let det = p.det();
    if det == 0 {
        return Err(Error::SingularSystem);
    }
    let count = det.unsigned_abs();
    if count > cap {
        return Err(Error::CountOverflow { count, cap });
    }
    let d = p.dim();
    let h = p.column_hermite_form()?;
    let diag: Vec<i128> = (0..d).map(|i| h[i * d + i]).collect();
    let adj = p.adjugate();
    let (sign, den) = if det < 0 { (-1, -det) } else { (1, det) };

    let mut points = Vec::with_capacity(count as usize);
    let mut rep = vec![0i128; d];
    loop {
        let num: Vec<i128> = (0..d)
            .map(|i| {
                let s: i128 = (0..d).map(|j| adj[i * d + j] * rep[j]).sum();
                (sign * s).rem_euclid(den)
            })
            .collect();
        points.push(RationalPoint { num, den });
        // odometer over the box prod [0, H_ii)
        let mut i = 0;
        loop {
            if i == d {
                return Ok(points);
            }
            rep[i] += 1;
            if rep[i] < diag[i] {
                break;
            }
            rep[i] = 0;
            i += 1;
        }
    }
}
