//! Ergodic-theoretic numerics for quantum channels defined by finite Kraus
//! measures.
//!
//! The numerical core is generic over the real scalar type ([`Real`], for
//! `f32` and `f64`); the `*64` aliases below fix the double-precision
//! instantiation used by the command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod entropy;
pub mod ergodic;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lyapunov;
pub mod purification;
pub mod random;
pub mod scalar;
pub mod trajectory;

pub use channel::{KrausAtom, KrausMeasure, Superoperator};
pub use error::{Error, Result};
pub use linalg::{DensityMatrix, ProjectivePoint};
pub use scalar::{ComplexMatrix, ComplexVector, Real};

pub type ComplexMatrix64 = ComplexMatrix<f64>;
pub type KrausMeasure64 = KrausMeasure<f64>;
pub type DensityMatrix64 = DensityMatrix<f64>;
pub type ProjectivePoint64 = ProjectivePoint<f64>;
