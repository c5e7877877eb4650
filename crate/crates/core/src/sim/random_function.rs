//! Friedman's random function generator: a weighted sum of 20 Gaussian bumps,
//! each acting on a random subset of the coordinates.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{KereError, Result};

pub const RANDOM_FUNCTION_TERMS: usize = 20;
/// Rate of the exponential draw behind the subset sizes (mean 2).
pub const SUBSET_RATE: f64 = 0.5;

/// `a · exp(-½ (x_S - μ)ᵀ V (x_S - μ))` for a coordinate subset `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpTerm {
    pub weight: f64,
    pub indices: Vec<usize>,
    pub center: Vec<f64>,
    /// Row-major `V = U D Uᵀ`.
    pub precision: Vec<Vec<f64>>,
    /// `√d_j`, kept for inspection.
    pub root_scales: Vec<f64>,
}

impl BumpTerm {
    pub fn subset_size(&self) -> usize {
        self.indices.len()
    }

    /// The Gaussian factor alone (no weight); lies in `(0, 1]`.
    pub fn bump(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = self
            .indices
            .iter()
            .zip(self.center.iter())
            .map(|(&j, m)| x[j] - m)
            .collect();
        let quad: f64 = self
            .precision
            .iter()
            .zip(d.iter())
            .map(|(row, di)| di * row.iter().zip(d.iter()).map(|(v, dj)| v * dj).sum::<f64>())
            .sum();
        (-0.5 * quad).exp()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.weight * self.bump(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFunction {
    pub dim: usize,
    pub seed: u64,
    pub terms: Vec<BumpTerm>,
}

impl RandomFunction {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(KereError::DimensionMismatch {
                context: "random function input",
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(self.terms.iter().map(|t| t.eval(x)).sum())
    }

    /// Evaluates every row of `x`.
    pub fn eval_rows(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.dim {
            return Err(KereError::DimensionMismatch {
                context: "random function input",
                expected: self.dim,
                actual: x.ncols(),
            });
        }
        let mut row = vec![0.0; self.dim];
        Ok(DVector::from_fn(x.nrows(), |i, _| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = x[(i, j)];
            }
            self.terms.iter().map(|t| t.eval(&row)).sum()
        }))
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// A random function on `R^p`.
///
/// Per term: `a ~ U[-1, 1]`, subset size `min(⌊1.5 + r⌋, p)` with
/// `r ~ Exp(rate 0.5)`, centre `μ ~ N(0, I)`, `V = U D Uᵀ` with `U` Haar
/// orthogonal and `√d_j ~ U[0.1, 2]`.
pub fn random_function(p: usize, seed: u64) -> Result<RandomFunction> {
    if p == 0 {
        return Err(KereError::param("p", "need at least one predictor"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exp = Exp::new(SUBSET_RATE).expect("positive rate");
    let terms = (0..RANDOM_FUNCTION_TERMS)
        .map(|_| {
            let weight = rng.random_range(-1.0..=1.0);
            let r: f64 = exp.sample(&mut rng);
            let size = ((1.5 + r).floor() as usize).clamp(1, p);
            let mut indices = index::sample(&mut rng, p, size).into_vec();
            indices.sort_unstable();
            let center: Vec<f64> = (0..size).map(|_| rng.sample(StandardNormal)).collect();
            let u = random_orthogonal(size, &mut rng);
            let root_scales: Vec<f64> = (0..size).map(|_| rng.random_range(0.1..=2.0)).collect();
            let d = DVector::from_iterator(size, root_scales.iter().map(|s| s * s));
            let v = &u * DMatrix::from_diagonal(&d) * u.transpose();
            BumpTerm {
                weight,
                indices,
                center,
                precision: (0..size)
                    .map(|i| v.row(i).iter().copied().collect())
                    .collect(),
                root_scales,
            }
        })
        .collect();
    Ok(RandomFunction {
        dim: p,
        seed,
        terms,
    })
}
