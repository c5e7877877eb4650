//! Random problem instances shared by the integration tests.
#![allow(dead_code)]

use kere::kernel::{matrix_rows, GramBundle, KernelSpec};
use kere::ExpectileLevel;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LEVELS: [f64; 7] = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn level(w: f64) -> ExpectileLevel {
    ExpectileLevel::new(w).unwrap()
}

pub fn uniform_inputs(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0))
}

/// Smooth signal plus skewed noise.
pub fn response(rng: &mut ChaCha8Rng, x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(x.nrows(), |i, _| {
        let s: f64 = x
            .row(i)
            .iter()
            .enumerate()
            .map(|(j, v)| v * (j as f64 + 1.0).sqrt())
            .sum();
        let e: f64 = rng.random_range(-1.0f64..1.0);
        (2.0 * s).sin() + 0.5 * e + 0.3 * e * e
    })
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

pub fn decomposed(kernel: &KernelSpec, x: &DMatrix<f64>) -> GramBundle {
    GramBundle::from_points(kernel, matrix_rows(x))
        .unwrap()
        .eigendecompose()
        .unwrap()
}

/// Points at least `δ` apart, with `δ` about half the typical spacing.
pub fn separated_inputs(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (DMatrix<f64>, f64) {
    let delta = 0.5 * 2.0 / (n as f64).powf(1.0 / p as f64);
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n);
    while points.len() < n {
        let c: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let far = points
            .iter()
            .all(|q| q.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>() >= delta * delta);
        if far {
            points.push(c);
        }
    }
    (DMatrix::from_fn(n, p, |i, j| points[i][j]), delta)
}

/// An RBF bundle whose bandwidth is small relative to the point spacing,
/// so the Gram matrix is comfortably positive definite.
pub fn well_conditioned(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (GramBundle, DVector<f64>) {
    let (x, delta) = separated_inputs(rng, n, p);
    let y = response(rng, &x);
    (decomposed(&KernelSpec::rbf(delta * delta).unwrap(), &x), y)
}

pub fn max_abs(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}
