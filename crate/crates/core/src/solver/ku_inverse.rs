//! Inverse of the majorizer curvature `K_u(λ)` with cheap λ updates.
//!
//! `K_u(λ) = q [[n, 1ᵀK], [K1, KK + (λ/q) K]]` with `q = max(1-ω, ω)`.
//! Everything that does not depend on λ (the eigenpairs of `K`, `Uᵀ1`,
//! `K1`) is computed once per bundle and level.
//!
//! Two routes are provided. [`KuInverseFactory::dense_inverse`] materialises
//! `K_u⁻¹(λ)` through the block partition, the Sherman–Morrison update of the
//! Schur complement and `A_λ⁻¹ = U diag(1 / (D² + cD)) Uᵀ`. The solver itself
//! uses [`LambdaUpdate`], which applies the same inverse to the structured
//! right-hand side of the MM update through `(K + cI)⁻¹ = U diag(1/(D + c)) Uᵀ`.
//! That form never divides by a vanishing eigenvalue, so it stays accurate on
//! the numerically rank-deficient Gram matrices produced by smooth kernels.

use nalgebra::{DMatrix, DVector};

use crate::error::{KereError, Result};
use crate::kernel::GramBundle;
use crate::loss::ExpectileLevel;

/// Threshold on `|1 + g|` below which Sherman–Morrison is abandoned for a
/// dense inversion of the Schur complement.
pub const SHERMAN_MORRISON_GUARD: f64 = 1e-12;

/// Caches the λ-independent pieces of `K_u⁻¹(λ)` for one bundle and level.
#[derive(Debug, Clone)]
pub struct KuInverseFactory<'a> {
    bundle: &'a GramBundle,
    level: ExpectileLevel,
    /// `max(D_raw, 0)`; used by the shifted solve.
    shift_values: DVector<f64>,
    /// `Uᵀ1`
    ones_proj: DVector<f64>,
    /// `K1`
    k_one: DVector<f64>,
}

impl<'a> KuInverseFactory<'a> {
    pub fn new(bundle: &'a GramBundle, level: ExpectileLevel) -> Result<Self> {
        let eigen = bundle.eigen()?;
        let n = bundle.n();
        let ones = DVector::from_element(n, 1.0);
        Ok(KuInverseFactory {
            bundle,
            level,
            shift_values: eigen.raw_values.map(|v| v.max(0.0)),
            ones_proj: eigen.vectors.tr_mul(&ones),
            k_one: bundle.gram() * &ones,
        })
    }

    pub fn bundle(&self) -> &'a GramBundle {
        self.bundle
    }

    pub fn level(&self) -> ExpectileLevel {
        self.level
    }

    /// The ratio `λ / max(1-ω, ω)` that scales `K` inside `A_λ`.
    pub fn shift(&self, lambda: f64) -> f64 {
        lambda / self.level.weight_max()
    }

    /// Per-λ state for the shifted solve. Costs `O(n)`.
    pub fn at(&self, lambda: f64) -> Result<LambdaUpdate<'_, 'a>> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(KereError::param(
                "lambda",
                format!("must be positive, got {lambda}"),
            ));
        }
        let c = self.shift(lambda);
        let inv_shift = self.shift_values.map(|d| 1.0 / (d + c));
        let ones_weight = self
            .ones_proj
            .iter()
            .zip(inv_shift.iter())
            .map(|(z, w)| z * z * w)
            .sum::<f64>();
        if !(ones_weight > 0.0 && ones_weight.is_finite()) {
            return Err(KereError::Singular(format!(
                "1ᵀ(K + cI)⁻¹1 = {ones_weight}"
            )));
        }
        Ok(LambdaUpdate {
            factory: self,
            lambda,
            inv_shift,
            ones_weight,
        })
    }

    /// `K_u(λ)` assembled directly from `K`.
    pub fn dense_ku(&self, lambda: f64) -> DMatrix<f64> {
        let k = self.bundle.gram();
        let n = k.nrows();
        let q = self.level.weight_max();
        let c = self.shift(lambda);
        let kk = k * k;
        DMatrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
            (0, 0) => q * n as f64,
            (0, j) => q * self.k_one[j - 1],
            (i, 0) => q * self.k_one[i - 1],
            (i, j) => q * (kk[(i - 1, j - 1)] + c * k[(i - 1, j - 1)]),
        })
    }

    /// `A_λ⁻¹ = U diag(1 / (D² + cD)) Uᵀ` from the clamped eigenvalues.
    pub fn a_inverse(&self, lambda: f64) -> Result<DMatrix<f64>> {
        let eigen = self.bundle.eigen()?;
        let c = self.shift(lambda);
        if let Some(j) = eigen.values.iter().position(|&d| d <= 0.0) {
            return Err(KereError::Singular(format!(
                "A_λ has a zero eigenvalue (index {j}); K is rank deficient"
            )));
        }
        let u = &eigen.vectors;
        let scaled = DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| {
            let d = eigen.values[j];
            u[(i, j)] / (d * d + c * d)
        });
        Ok(scaled * u.transpose())
    }

    /// `K_u⁻¹(λ)` through block partition, Sherman–Morrison and the
    /// eigendecomposition of `K`. Falls back to a dense inverse of the
    /// Schur complement when `|1 + g|` is below [`SHERMAN_MORRISON_GUARD`].
    pub fn dense_inverse(&self, lambda: f64) -> Result<DMatrix<f64>> {
        let n = self.bundle.n();
        let nf = n as f64;
        let q = self.level.weight_max();
        let a_inv = self.a_inverse(lambda)?;
        let u = &self.k_one;
        let a_inv_u = &a_inv * u;
        // B = -(1/n) u uᵀ, so g = trace(B A⁻¹) = -(1/n) uᵀ A⁻¹ u.
        let g = -u.dot(&a_inv_u) / nf;
        let q_inv = if (1.0 + g).abs() < SHERMAN_MORRISON_GUARD {
            log::warn!("Sherman–Morrison denominator 1 + g = {:.3e}; inverting the Schur complement directly", 1.0 + g);
            let k = self.bundle.gram();
            let schur = k * k + k * self.shift(lambda) - (u * u.transpose()) / nf;
            schur
                .try_inverse()
                .ok_or_else(|| KereError::Singular("Schur complement of K_u".into()))?
        } else {
            // Q⁻¹ = A⁻¹ - A⁻¹ B A⁻¹ / (1 + g)
            let correction = (&a_inv_u * a_inv_u.transpose()) / (nf * (1.0 + g));
            a_inv + correction
        };
        let q_inv_u = &q_inv * u;
        let corner = 1.0 / nf + u.dot(&q_inv_u) / (nf * nf);
        let mut out = DMatrix::zeros(n + 1, n + 1);
        out[(0, 0)] = corner / q;
        for i in 0..n {
            out[(0, i + 1)] = -q_inv_u[i] / (nf * q);
            out[(i + 1, 0)] = -q_inv_u[i] / (nf * q);
        }
        out.view_mut((1, 1), (n, n)).copy_from(&(q_inv / q));
        if out.iter().any(|v| !v.is_finite()) {
            return Err(KereError::NonFinite("K_u inverse"));
        }
        Ok(out)
    }
}

/// The λ-specific part of the factory: `(D + c)⁻¹` and `1ᵀ(K + cI)⁻¹1`.
#[derive(Debug, Clone)]
pub struct LambdaUpdate<'f, 'a> {
    factory: &'f KuInverseFactory<'a>,
    lambda: f64,
    inv_shift: DVector<f64>,
    ones_weight: f64,
}

impl<'f, 'a> LambdaUpdate<'f, 'a> {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn factory(&self) -> &'f KuInverseFactory<'a> {
        self.factory
    }

    pub fn level(&self) -> ExpectileLevel {
        self.factory.level
    }

    /// The MM displacement `K_u⁻¹(-λK₀α + ½ Σ φ'(r_i) K_i)` for the current
    /// coefficients `alpha` and loss derivatives `dphi = φ'(r)`.
    ///
    /// Writing `v = ½φ'(r) - λα` the right-hand side is `[½1ᵀφ'(r); Kv]`.
    /// The returned `(δ₀, δ)` solves `K_u Δ = b` and additionally satisfies
    /// `q(1δ₀ + (K + cI)δ) = v`, so it is zero exactly when `2λα = φ'(r)` and
    /// `Σα = 0`.
    pub fn displacement(&self, alpha: &DVector<f64>, dphi: &DVector<f64>) -> (f64, DVector<f64>) {
        let factory = self.factory;
        let q = factory.level.weight_max();
        let u = &factory
            .bundle
            .eigen()
            .expect("factory requires eigenpairs")
            .vectors;
        let w = (dphi * 0.5 - alpha * self.lambda) / q;
        let t = u.tr_mul(&w);
        let z = &factory.ones_proj;
        let z_rw: f64 = z
            .iter()
            .zip(t.iter())
            .zip(self.inv_shift.iter())
            .map(|((zi, ti), si)| zi * ti * si)
            .sum();
        let delta0 = (alpha.sum() + z_rw) / self.ones_weight;
        let coeffs = DVector::from_fn(t.len(), |j, _| (t[j] - z[j] * delta0) * self.inv_shift[j]);
        (delta0, u * coeffs)
    }
}
