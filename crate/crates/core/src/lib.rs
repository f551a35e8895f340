//! Pfaffian correlation functions for orthogonal and symplectic random-matrix
//! ensembles and their multi-slice generalizations.

// `!(a > b)` deliberately treats NaN as failing the test
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlations;
pub mod error;
pub mod eynard_mehta;
pub mod kernels;
pub mod linalg;
pub mod measures;
pub mod montecarlo;
pub mod orthopoly;
pub mod scalar;
pub mod skewpoly;
pub mod skewproduct;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = linalg::DenseMatrix<f64>;
pub type SkewMatrix = linalg::AntisymMatrix<f64>;
