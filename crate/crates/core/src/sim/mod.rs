//! Simulation designs and evaluation metrics.
//!
//! * Simulation I: `y = sin(0.7x) + x²/20 + ((|x| + 1)/5) ε`, `x ~ U[-8, 8]`.
//! * Simulation II: `y = f₁(x) + |f₂(x)| ε`, `x ~ N(0, I_p)`, with `f₁`, `f₂`
//!   random functions (`f₂ ≡ 1` in the homoscedastic model).
//!
//! The true `ω`-expectile in both is `mean(x) + scale(x) · b_ω(ε)`.

mod random_function;
pub mod study;

pub use random_function::{
    random_function, random_orthogonal, BumpTerm, RandomFunction, RANDOM_FUNCTION_TERMS,
};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{KereError, Result};
use crate::loss::{ExpectileLevel, ScalarDistribution};

/// Bisection tolerance for `b_ω(ε)`.
pub const EXPECTILE_TOL: f64 = 1e-12;

/// Noise laws of Simulation I.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sim1Error {
    /// Standard Laplace (scale 1).
    Laplace,
    /// `0.5 N(0, 1/4) + 0.5 N(1, 1/16)`.
    MixedNormal,
}

impl Sim1Error {
    pub fn distribution(self) -> ScalarDistribution {
        match self {
            Sim1Error::Laplace => ScalarDistribution::laplace(0.0, 1.0).expect("valid"),
            Sim1Error::MixedNormal => {
                ScalarDistribution::normal_mixture(&[(0.5, 0.0, 0.25), (0.5, 1.0, 1.0 / 16.0)])
                    .expect("valid")
            }
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sim1Error::Laplace => "Laplace",
            Sim1Error::MixedNormal => "Mixture",
        }
    }
}

/// Noise laws of Simulation II.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sim2Error {
    /// `N(0, 1)`.
    Normal,
    /// Student t with 4 degrees of freedom.
    T4,
    /// `0.9 N(0, 1) + 0.1 N(1, 4)`.
    MixedNormal,
    /// Any samplable law.
    Custom(ScalarDistribution),
}

impl Sim2Error {
    pub fn distribution(&self) -> ScalarDistribution {
        match self {
            Sim2Error::Normal => ScalarDistribution::normal(0.0, 1.0).expect("valid"),
            Sim2Error::T4 => ScalarDistribution::student_t(4.0).expect("valid"),
            Sim2Error::MixedNormal => {
                ScalarDistribution::normal_mixture(&[(0.9, 0.0, 1.0), (0.1, 1.0, 4.0)])
                    .expect("valid")
            }
            Sim2Error::Custom(d) => d.clone(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Sim2Error::Normal => "Normal",
            Sim2Error::T4 => "t4",
            Sim2Error::MixedNormal => "Mixture",
            Sim2Error::Custom(_) => "Custom",
        }
    }
}

/// A location–scale design `y = mean(x) + scale(x) ε`.
pub trait Design {
    fn mean_at(&self, x: &[f64]) -> f64;
    fn scale_at(&self, x: &[f64]) -> f64;
    fn noise(&self) -> ScalarDistribution;
    fn dim(&self) -> usize;

    /// `mean(x) + scale(x) b_ω(ε)`.
    fn true_expectile(&self, x: &[f64], level: ExpectileLevel) -> Result<f64> {
        let b = self.noise().expectile(level, EXPECTILE_TOL)?;
        Ok(self.mean_at(x) + self.scale_at(x) * b)
    }

    /// [`true_expectile`](Design::true_expectile) for every row, computing `b_ω` once.
    fn true_expectiles(&self, x: &DMatrix<f64>, level: ExpectileLevel) -> Result<DVector<f64>> {
        if x.ncols() != self.dim() {
            return Err(KereError::DimensionMismatch {
                context: "design input",
                expected: self.dim(),
                actual: x.ncols(),
            });
        }
        let b = self.noise().expectile(level, EXPECTILE_TOL)?;
        let mut row = vec![0.0; x.ncols()];
        Ok(DVector::from_fn(x.nrows(), |i, _| {
            for (j, r) in row.iter_mut().enumerate() {
                *r = x[(i, j)];
            }
            self.mean_at(&row) + self.scale_at(&row) * b
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sim1Spec {
    pub n: usize,
    pub error: Sim1Error,
    pub seed: u64,
}

impl Sim1Spec {
    pub fn new(n: usize, error: Sim1Error, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(KereError::param("n", "need at least one observation"));
        }
        Ok(Sim1Spec { n, error, seed })
    }
}

pub fn sim1_mean(x: f64) -> f64 {
    (0.7 * x).sin() + x * x / 20.0
}

pub fn sim1_scale(x: f64) -> f64 {
    (x.abs() + 1.0) / 5.0
}

impl Design for Sim1Spec {
    fn mean_at(&self, x: &[f64]) -> f64 {
        sim1_mean(x[0])
    }

    fn scale_at(&self, x: &[f64]) -> f64 {
        sim1_scale(x[0])
    }

    fn noise(&self) -> ScalarDistribution {
        self.error.distribution()
    }

    fn dim(&self) -> usize {
        1
    }
}

/// `n` draws of `(x, y)` from Simulation I.
pub fn sim1_generate(spec: &Sim1Spec) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let xs: Vec<f64> = (0..spec.n).map(|_| rng.random_range(-8.0..=8.0)).collect();
    let sampler = spec.error.distribution().sampler()?;
    let eps = sampler.draw_n(&mut rng, spec.n);
    let y = DVector::from_fn(spec.n, |i, _| sim1_mean(xs[i]) + sim1_scale(xs[i]) * eps[i]);
    Ok((DMatrix::from_vec(spec.n, 1, xs), y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sim2Spec {
    pub n: usize,
    pub p: usize,
    pub heteroscedastic: bool,
    pub error: Sim2Error,
    pub f1: RandomFunction,
    /// `None` in the homoscedastic model (`f₂ ≡ 1`).
    pub f2: Option<RandomFunction>,
    pub seed: u64,
}

impl Sim2Spec {
    /// Draws `f₁` (and `f₂` when heteroscedastic) from `function_seed`; `seed`
    /// drives the observations. `f₁` does not depend on the heteroscedastic
    /// flag, so matched seeds share it.
    pub fn new(
        n: usize,
        p: usize,
        heteroscedastic: bool,
        error: Sim2Error,
        function_seed: u64,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(KereError::param("n", "need at least one observation"));
        }
        let f1 = random_function(p, function_seed)?;
        let f2 = if heteroscedastic {
            Some(random_function(p, function_seed ^ 0x9e37_79b9_7f4a_7c15)?)
        } else {
            None
        };
        Ok(Sim2Spec {
            n,
            p,
            heteroscedastic,
            error,
            f1,
            f2,
            seed,
        })
    }

    fn eval(f: &RandomFunction, x: &[f64]) -> f64 {
        f.eval(x).expect("dimension checked by caller")
    }
}

impl Design for Sim2Spec {
    fn mean_at(&self, x: &[f64]) -> f64 {
        Self::eval(&self.f1, x)
    }

    fn scale_at(&self, x: &[f64]) -> f64 {
        self.f2.as_ref().map_or(1.0, |f| Self::eval(f, x).abs())
    }

    fn noise(&self) -> ScalarDistribution {
        self.error.distribution()
    }

    fn dim(&self) -> usize {
        self.p
    }
}

/// `n` draws of `(x, y)` from Simulation II. Inputs and noise come from
/// separate streams so the homoscedastic and heteroscedastic models share
/// `x` and `ε` under one seed.
pub fn sim2_generate(spec: &Sim2Spec) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut x_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut e_rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(0x5851_f42d_4c95_7f2d));
    // Drawn row by row, so the first m rows do not depend on n.
    let draws: Vec<f64> = (0..spec.n * spec.p)
        .map(|_| x_rng.sample::<f64, _>(StandardNormal))
        .collect();
    let x = DMatrix::from_row_slice(spec.n, spec.p, &draws);
    let eps = spec
        .error
        .distribution()
        .sampler()?
        .draw_n(&mut e_rng, spec.n);
    let mut row = vec![0.0; spec.p];
    let y = DVector::from_fn(spec.n, |i, _| {
        for (j, r) in row.iter_mut().enumerate() {
            *r = x[(i, j)];
        }
        spec.mean_at(&row) + spec.scale_at(&row) * eps[i]
    });
    Ok((x, y))
}

fn check_same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(KereError::DimensionMismatch {
            context: "metric inputs",
            expected: a,
            actual: b,
        });
    }
    if a == 0 {
        return Err(KereError::param("metric inputs", "empty vectors"));
    }
    Ok(())
}

/// Mean absolute deviation `(1/n) Σ |truth_i - predicted_i|`.
pub fn mad(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    check_same_len(truth.len(), predicted.len())?;
    Ok(predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (t - p).abs())
        .sum::<f64>()
        / truth.len() as f64)
}

/// Mean expectile loss `(1/n) Σ φ_ω(y_i - fitted_i)`.
pub fn prediction_error(y: &[f64], fitted: &[f64], level: ExpectileLevel) -> Result<f64> {
    check_same_len(y.len(), fitted.len())?;
    Ok(y.iter()
        .zip(fitted)
        .map(|(a, b)| level.loss(a - b))
        .sum::<f64>()
        / y.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(w: f64) -> ExpectileLevel {
        ExpectileLevel::new(w).unwrap()
    }

    #[test]
    fn sim1_components_at_origin() {
        assert_eq!(sim1_mean(0.0), 0.0);
        assert_eq!(sim1_scale(0.0), 0.2);
    }

    #[test]
    fn sim1_inputs_in_range_and_deterministic() {
        let spec = Sim1Spec::new(500, Sim1Error::MixedNormal, 7).unwrap();
        let (x, y) = sim1_generate(&spec).unwrap();
        assert!(x.iter().all(|v| (-8.0..=8.0).contains(v)));
        assert_eq!(sim1_generate(&spec).unwrap(), (x, y));
    }

    #[test]
    fn sim1_truth_at_half_for_laplace() {
        let spec = Sim1Spec::new(1, Sim1Error::Laplace, 0).unwrap();
        for x in [-5.0, 0.3, 7.0] {
            let t = spec.true_expectile(&[x], lv(0.5)).unwrap();
            assert!((t - sim1_mean(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn sim2_degenerate_noise_gives_mean() {
        let spec = Sim2Spec::new(
            50,
            4,
            false,
            Sim2Error::Custom(ScalarDistribution::point_mass(0.0)),
            3,
            4,
        )
        .unwrap();
        let (x, y) = sim2_generate(&spec).unwrap();
        let f = spec.f1.eval_rows(&x).unwrap();
        assert_eq!(y, f);
    }

    #[test]
    fn sim2_deterministic_and_matched() {
        let homo = Sim2Spec::new(40, 10, false, Sim2Error::T4, 1, 2).unwrap();
        let hetero = Sim2Spec::new(40, 10, true, Sim2Error::T4, 1, 2).unwrap();
        assert_eq!(sim2_generate(&homo).unwrap(), sim2_generate(&homo).unwrap());
        assert_eq!(homo.f1, hetero.f1);
        assert_eq!(
            sim2_generate(&homo).unwrap().0,
            sim2_generate(&hetero).unwrap().0
        );
    }

    #[test]
    fn sim2_homoscedastic_noise_variance() {
        let spec = Sim2Spec::new(100_000, 10, false, Sim2Error::Normal, 5, 6).unwrap();
        let (x, y) = sim2_generate(&spec).unwrap();
        let r = y - spec.f1.eval_rows(&x).unwrap();
        let mean = r.mean();
        let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn true_expectile_is_monotone_and_symmetric_at_half() {
        let spec = Sim2Spec::new(1, 3, true, Sim2Error::MixedNormal, 8, 0).unwrap();
        let x = [0.2, -0.4, 1.1];
        let mut prev = f64::NEG_INFINITY;
        for k in 1..20 {
            let t = spec.true_expectile(&x, lv(k as f64 / 20.0)).unwrap();
            if spec.scale_at(&x) > 0.0 {
                assert!(t > prev);
            }
            prev = t;
        }
        let homo = Sim2Spec::new(1, 3, false, Sim2Error::Normal, 8, 0).unwrap();
        assert!(
            (homo.true_expectile(&x, lv(0.5)).unwrap() - homo.f1.eval(&x).unwrap()).abs() < 1e-10
        );
    }

    #[test]
    fn metric_examples() {
        assert_eq!(mad(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((mad(&[1.5, 2.5], &[1.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(mad(&[1.0], &[1.0, 2.0]).is_err());
        let y = [1.0, -2.0, 0.5];
        assert_eq!(prediction_error(&y, &y, lv(0.3)).unwrap(), 0.0);
        let f = [0.0, 0.0, 0.0];
        let mse = y.iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert!((prediction_error(&y, &f, lv(0.5)).unwrap() - mse / 2.0).abs() < 1e-15);
        let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let ratio = prediction_error(&y2, &f, lv(0.8)).unwrap()
            / prediction_error(&y, &f, lv(0.8)).unwrap();
        assert!((ratio - 4.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let p = [0.3, -1.0, 2.0, 0.7];
        let t = [0.1, -0.5, 2.5, 0.0];
        let pp = [2.0, 0.3, 0.7, -1.0];
        let tp = [2.5, 0.1, 0.0, -0.5];
        assert!((mad(&p, &t).unwrap() - mad(&pp, &tp).unwrap()).abs() < 1e-15);
        let l = lv(0.9);
        assert!(
            (prediction_error(&t, &p, l).unwrap() - prediction_error(&tp, &pp, l).unwrap()).abs()
                < 1e-15
        );
    }
}
