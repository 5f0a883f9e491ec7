//! Integer lattice algebra and spectral data of toral automorphisms.

mod matrix;
mod periodic;
mod spectral;

pub use matrix::IntMatrix;
pub use periodic::{periodic_points, periodic_points_exact, RationalPoint, DEFAULT_POINT_CAP};
pub use spectral::{spectral_splitting, BunchingReport, Line, SpectralSplitting, SplittingClass, SuComponents};

pub(crate) use spectral::{dot, norm};

use serde::{Deserialize, Serialize};

/// A point of the torus, stored by its canonical representative in `[0,1)^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    /// Reduces an arbitrary lift mod `Z^d`.
    pub fn new(lift: Vec<f64>) -> Self {
        TorusPoint { coords: lift.into_iter().map(reduce_unit).collect() }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Distance on the torus (shortest lift difference).
    pub fn torus_distance(&self, other: &TorusPoint) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| {
                let d = (a - b).rem_euclid(1.0);
                d.min(1.0 - d).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Canonical representative in `[0, 1)`.
pub fn reduce_unit(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_is_idempotent() {
        for x in [-3.25, -1e-18, 0.0, 0.5, 1.0, 7.999999999999999] {
            let r = reduce_unit(x);
            assert!((0.0..1.0).contains(&r));
            assert_eq!(reduce_unit(r), r);
        }
        let p = TorusPoint::new(vec![1.25, -0.5]);
        assert_eq!(p.coords(), &[0.25, 0.5]);
        assert_eq!(TorusPoint::new(p.coords().to_vec()), p);
    }
}
