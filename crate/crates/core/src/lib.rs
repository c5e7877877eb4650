//! Kernel expectile regression.
//!
//! Fits the `ω`-expectile of a response as `α₀ + Σ α_i K(x_i, ·)` by
//! minimising the penalised asymmetric squared loss with a
//! majorize–minimize solver whose per-λ updates reuse a single
//! eigendecomposition of the Gram matrix.
//!
//! * [`loss`]: the asymmetric squared loss, its conjugate and population
//!   expectiles.
//! * [`kernel`]: kernels, Gram matrices and their eigendecomposition.
//! * [`solver`]: the MM solver, optimality certificate and rate bound.
//! * [`path`]: warm-started fits along a λ grid.
//! * [`select`]: k-fold cross-validation over `(λ, σ²)`.
//! * [`sim`]: the two simulation designs and study drivers.

pub mod cli;
pub mod data;
pub mod error;
pub mod kernel;
pub mod loss;
pub mod model;
pub mod path;
pub mod select;
pub mod sim;
pub mod solver;

pub use error::{KereError, Result};
pub use kernel::{GramBundle, KernelSpec, Standardizer};
pub use loss::{ExpectileLevel, ScalarDistribution};
pub use solver::{fit, Coefficients, Fit, FitDiagnostics, FitOptions};
