//! Low-rank Krylov projection solvers for differential Lyapunov equations
//!
//! ```text
//! X'(t) = A X(t) + X(t) A^T + B B^T,   X(t0) = X0,
//! ```
//!
//! with large sparse `A` and a thin block `B`.

pub mod analysis;
pub mod cli;
pub mod dense;
pub mod krylov;
pub mod error;
pub mod grid;
pub mod lu;
pub mod mtx;
pub mod operator;
pub mod problems;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod spectral;

pub use dense::DenseMatrix;
pub use error::{Error, Result};
