//! Cohomological equations over toral automorphisms: periodic cycle
//! functionals, Livšic solvers, small-divisor Diophantine tools and the
//! derived-from-Anosov and Anosov-bundle pipelines.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ab;
pub mod da;
pub mod error;
pub mod function;
pub mod livsic;
pub mod par;
pub mod pcf;
pub mod smalldiv;
pub mod torus;

pub use error::{Error, Result};
pub use function::{BandLimitedFunction, CoefficientRecord, GridFunction};
pub use par::Workers;
pub use torus::{IntMatrix, TorusPoint};
