//! Kernels, Gram matrices and the eigendecomposition reused along λ paths.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KereError, Result};

/// Relative threshold below which eigenvalues are treated as zero.
pub const EIGEN_CLAMP: f64 = 1e-8;

/// A kernel family together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `exp(-‖x - x'‖² / σ²)`
    Rbf { sigma2: f64 },
    /// `tanh(κ⟨x, x'⟩ + θ)`
    Sigmoid { kappa: f64, theta: f64 },
    /// `(⟨x, x'⟩ + θ)^d`
    Polynomial { theta: f64, degree: u32 },
    /// `⟨x, x'⟩`
    Linear,
}

impl KernelSpec {
    pub fn rbf(sigma2: f64) -> Result<Self> {
        let spec = KernelSpec::Rbf { sigma2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn polynomial(theta: f64, degree: u32) -> Result<Self> {
        let spec = KernelSpec::Polynomial { theta, degree };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sigmoid(kappa: f64, theta: f64) -> Result<Self> {
        let spec = KernelSpec::Sigmoid { kappa, theta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { sigma2 } if !(sigma2 > 0.0 && sigma2.is_finite()) => Err(
                KereError::param("sigma2", format!("must be positive, got {sigma2}")),
            ),
            KernelSpec::Polynomial { degree, .. } if degree < 1 => {
                Err(KereError::param("degree", "must be at least 1"))
            }
            KernelSpec::Polynomial { theta, .. } | KernelSpec::Sigmoid { theta, .. }
                if !theta.is_finite() =>
            {
                Err(KereError::param("theta", "must be finite"))
            }
            KernelSpec::Sigmoid { kappa, .. } if !kappa.is_finite() => {
                Err(KereError::param("kappa", "must be finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Rbf { .. } => "rbf",
            KernelSpec::Sigmoid { .. } => "sigmoid",
            KernelSpec::Polynomial { .. } => "polynomial",
            KernelSpec::Linear => "linear",
        }
    }

    /// `K(x, x')`, checking that both points have the same dimension.
    pub fn eval(&self, x: &[f64], xp: &[f64]) -> Result<f64> {
        if x.len() != xp.len() {
            return Err(KereError::DimensionMismatch {
                context: "kernel_eval",
                expected: x.len(),
                actual: xp.len(),
            });
        }
        Ok(self.eval_unchecked(x, xp))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], xp: &[f64]) -> f64 {
        match *self {
            KernelSpec::Rbf { sigma2 } => {
                let d2: f64 = x.iter().zip(xp).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / sigma2).exp()
            }
            KernelSpec::Sigmoid { kappa, theta } => (kappa * dot(x, xp) + theta).tanh(),
            KernelSpec::Polynomial { theta, degree } => (dot(x, xp) + theta).powi(degree as i32),
            KernelSpec::Linear => dot(x, xp),
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `K(x, x')` for a kernel spec.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], xp: &[f64]) -> Result<f64> {
    spec.eval(x, xp)
}

/// Rows of an `n × p` design matrix as owned vectors.
pub fn matrix_rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows())
        .map(|i| x.row(i).iter().copied().collect())
        .collect()
}

/// Eigen-factors `K = U diag(D) Uᵀ`, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct EigenParts {
    pub vectors: DMatrix<f64>,
    /// Eigenvalues after clamping; all nonnegative.
    pub values: DVector<f64>,
    /// Eigenvalues as returned by the decomposition, before clamping.
    pub raw_values: DVector<f64>,
    /// Whether negative eigenvalues beyond round-off were removed.
    pub projected: bool,
}

/// The Gram matrix of the training inputs plus its (lazily computed)
/// eigendecomposition.
#[derive(Debug, Clone)]
pub struct GramBundle {
    kernel: KernelSpec,
    points: Vec<Vec<f64>>,
    gram: DMatrix<f64>,
    eigen: Option<EigenParts>,
}

/// Assemble the Gram matrix `K_ij = K(x_i, x_j)` of the rows of `x`.
/// Only the upper triangle is evaluated; the lower one is mirrored.
pub fn gram_matrix(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<GramBundle> {
    GramBundle::from_points(spec, matrix_rows(x))
}

impl GramBundle {
    pub fn from_points(spec: &KernelSpec, points: Vec<Vec<f64>>) -> Result<Self> {
        spec.validate()?;
        let n = points.len();
        if n == 0 {
            return Err(KereError::param("x", "need at least one observation"));
        }
        let p = points[0].len();
        if let Some(bad) = points.iter().find(|r| r.len() != p) {
            return Err(KereError::DimensionMismatch {
                context: "gram_matrix",
                expected: p,
                actual: bad.len(),
            });
        }
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (i..n)
                    .map(|j| spec.eval_unchecked(&points[i], &points[j]))
                    .collect()
            })
            .collect();
        let mut gram = DMatrix::zeros(n, n);
        for (i, row) in upper.iter().enumerate() {
            for (offset, &v) in row.iter().enumerate() {
                let j = i + offset;
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        Ok(GramBundle {
            kernel: *spec,
            points,
            gram,
            eigen: None,
        })
    }

    /// Assemble a bundle around an explicitly supplied symmetric matrix.
    /// Used for algebraic checks on matrices that do not come from data.
    pub fn from_gram(gram: DMatrix<f64>) -> Result<Self> {
        if !gram.is_square() || gram.nrows() == 0 {
            return Err(KereError::param(
                "gram",
                "must be a non-empty square matrix",
            ));
        }
        let n = gram.nrows();
        for i in 0..n {
            for j in 0..i {
                if (gram[(i, j)] - gram[(j, i)]).abs() > 1e-12 {
                    return Err(KereError::param("gram", "must be symmetric"));
                }
            }
        }
        Ok(GramBundle {
            kernel: KernelSpec::Linear,
            points: Vec::new(),
            gram,
            eigen: None,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn n(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Training inputs in kernel space (after any standardisation).
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn is_decomposed(&self) -> bool {
        self.eigen.is_some()
    }

    pub fn eigen(&self) -> Result<&EigenParts> {
        self.eigen.as_ref().ok_or(KereError::NotDecomposed)
    }

    /// Compute `K = U diag(D) Uᵀ`. Eigenvalues within `±1e-8·max(D)` are
    /// zeroed; larger negative eigenvalues (possible for the sigmoid kernel)
    /// are zeroed too and `K` is replaced by its nearest PSD matrix, with a
    /// warning.
    pub fn eigendecompose(mut self) -> Result<Self> {
        if self.eigen.is_some() {
            return Ok(self);
        }
        if self.gram.iter().any(|v| !v.is_finite()) {
            return Err(KereError::NonFinite("gram matrix"));
        }
        let n = self.n();
        let decomposition = self
            .gram
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or_else(|| {
                KereError::Decomposition("symmetric eigensolver did not converge".into())
            })?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            decomposition.eigenvalues[b]
                .partial_cmp(&decomposition.eigenvalues[a])
                .expect("finite eigenvalues")
        });
        let mut vectors = DMatrix::zeros(n, n);
        let mut raw_values = DVector::zeros(n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &decomposition.eigenvectors.column(src));
            raw_values[dst] = decomposition.eigenvalues[src];
        }
        let top = raw_values[0].max(0.0);
        let threshold = EIGEN_CLAMP * top;
        let mut values = raw_values.clone();
        let mut negative_mass = 0.0;
        for v in values.iter_mut() {
            if *v <= -threshold {
                negative_mass += -*v;
                *v = 0.0;
            } else if *v < threshold {
                *v = 0.0;
            }
        }
        let projected = negative_mass > 0.0;
        if projected {
            log::warn!(
                "{} Gram matrix is indefinite; clamping removed negative eigenvalue mass {:.3e} \
                 and the matrix was replaced by its PSD projection",
                self.kernel.name(),
                negative_mass
            );
            let scaled = DMatrix::from_fn(n, n, |i, j| vectors[(i, j)] * raw_values[j].max(0.0));
            let mut psd = &scaled * vectors.transpose();
            symmetrize(&mut psd);
            self.gram = psd;
            raw_values.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        self.eigen = Some(EigenParts {
            vectors,
            values,
            raw_values,
            projected,
        });
        Ok(self)
    }

    /// Kernel evaluations between new points (rows) and the training points (columns).
    pub fn cross_gram(&self, new_points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        cross_gram(&self.kernel, new_points, &self.points)
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `m × n` matrix of `K(new_i, train_j)`.
pub fn cross_gram(
    spec: &KernelSpec,
    new_points: &[Vec<f64>],
    train: &[Vec<f64>],
) -> Result<DMatrix<f64>> {
    let p = train.first().map(|r| r.len()).unwrap_or(0);
    if let Some(bad) = new_points.iter().find(|r| r.len() != p) {
        return Err(KereError::DimensionMismatch {
            context: "cross_gram",
            expected: p,
            actual: bad.len(),
        });
    }
    let rows: Vec<Vec<f64>> = new_points
        .par_iter()
        .map(|x| train.iter().map(|t| spec.eval_unchecked(x, t)).collect())
        .collect();
    Ok(DMatrix::from_fn(new_points.len(), train.len(), |i, j| {
        rows[i][j]
    }))
}

/// Per-column centring and scaling of a design matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Column means and sample standard deviations; constant columns keep scale 1.
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows();
        let (means, scales) = (0..x.ncols())
            .map(|j| {
                let col = x.column(j);
                let mean = col.sum() / n as f64;
                let var = if n > 1 {
                    col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                let sd = var.sqrt();
                (mean, if sd > 0.0 && sd.is_finite() { sd } else { 1.0 })
            })
            .unzip();
        Standardizer { means, scales }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim() {
            return Err(KereError::DimensionMismatch {
                context: "standardize",
                expected: self.dim(),
                actual: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.means[j]) / self.scales[j]
        }))
    }
}

/// Median of the pairwise squared Euclidean distances between rows.
pub fn median_pairwise_sq_distance(x: &DMatrix<f64>) -> f64 {
    let rows = matrix_rows(x);
    let mut d: Vec<f64> = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            d.push(
                rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum(),
            );
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite"));
    if *m > 0.0 {
        *m
    } else {
        1.0
    }
}
