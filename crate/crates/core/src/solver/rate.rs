//! Worst-case linear convergence rate of the MM iteration.
//!
//! With `K_l` the curvature matrix built from `min(1-ω, ω)` the objective gap
//! contracts by at least `Γ = 1 - γ_min(K_u⁻¹ K_l)` per step. `K_u⁻¹ K_l` is
//! similar to the symmetric `L⁻¹ K_l L⁻ᵀ` where `K_u = L Lᵀ`, which is what
//! gets decomposed here.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{KereError, Result};
use crate::kernel::GramBundle;
use crate::loss::ExpectileLevel;

/// Smallest admissible eigenvalue of `K_l` for the bound to exist.
pub const RATE_PD_FLOOR: f64 = 1e-10;

/// `weight [[n, 1ᵀK], [K1, KK + (λ/weight) K]]`.
pub fn curvature_matrix(gram: &DMatrix<f64>, weight: f64, lambda: f64) -> DMatrix<f64> {
    let n = gram.nrows();
    let k_one = gram.column_sum();
    let kk = gram * gram;
    DMatrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
        (0, 0) => weight * n as f64,
        (0, j) => weight * k_one[j - 1],
        (i, 0) => weight * k_one[i - 1],
        (i, j) => weight * kk[(i - 1, j - 1)] + lambda * gram[(i - 1, j - 1)],
    })
}

/// `Γ = 1 - γ_min(K_u⁻¹ K_l)`.
///
/// `Σ K_i K_iᵀ` alone is a sum of `n` rank-one terms in dimension `n + 1` and
/// is never invertible; what the bound needs is `K_l = λK₀ + min(1-ω, ω) Σ K_i K_iᵀ`
/// to be positive definite, which holds whenever `K` is. Its smallest
/// eigenvalue must exceed [`RATE_PD_FLOOR`], otherwise an error is returned.
/// Costs `O(n³)`.
pub fn rate_bound(bundle: &GramBundle, level: ExpectileLevel, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(KereError::param(
            "lambda",
            format!("must be positive, got {lambda}"),
        ));
    }
    let gram = bundle.gram();
    let upper = curvature_matrix(gram, level.weight_max(), lambda);
    let lower = curvature_matrix(gram, level.weight_min(), lambda);
    let lower_min = SymmetricEigen::new(lower.clone()).eigenvalues.min();
    if !(lower_min > RATE_PD_FLOOR) {
        return Err(KereError::Singular(format!(
            "K_l is not positive definite (smallest eigenvalue {lower_min:.3e})"
        )));
    }
    if level.weight_min() == level.weight_max() {
        // K_l = K_u: the majoriser is the objective itself.
        return Ok(0.0);
    }
    let chol = upper
        .cholesky()
        .ok_or_else(|| KereError::Singular("K_u is not positive definite".into()))?;
    let l = chol.l();
    let left = l
        .solve_lower_triangular(&lower)
        .ok_or_else(|| KereError::Singular("Cholesky factor of K_u".into()))?;
    let sym = l
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| KereError::Singular("Cholesky factor of K_u".into()))?;
    let sym = (&sym + sym.transpose()) * 0.5;
    let gamma_min = SymmetricEigen::new(sym).eigenvalues.min();
    Ok((1.0 - gamma_min).clamp(0.0, 1.0))
}
