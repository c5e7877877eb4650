//! Warm-started solution paths over a descending λ grid.
//!
//! The grid is log-uniform between `lambda_max` and `lambda_min`. The first
//! fit starts from zero and each later one from its predecessor; the
//! eigendecomposition of `K` is shared by every λ through one
//! [`KuInverseFactory`].

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{KereError, Result};
use crate::kernel::GramBundle;
use crate::loss::ExpectileLevel;
use crate::solver::{fit_with, Coefficients, FitDiagnostics, FitOptions, KuInverseFactory};

/// Default number of grid points.
pub const DEFAULT_PATH_LENGTH: usize = 100;
/// Default `lambda_min / lambda_max`.
pub const DEFAULT_LAMBDA_RATIO: f64 = 1e-4;
/// `max|α̂_i|` below which the probe fit counts as "all coefficients off".
pub const PROBE_ALPHA_TOL: f64 = 1e-4;
const PROBE_MAX_ITER: usize = 20;
const PROBE_MAX_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// Grid length `M`.
    pub n_lambda: usize,
    pub fit: FitOptions,
}

impl PathConfig {
    pub fn new(lambda_max: f64, lambda_min: f64, n_lambda: usize, fit: FitOptions) -> Result<Self> {
        let cfg = PathConfig {
            lambda_max,
            lambda_min,
            n_lambda,
            fit,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Endpoints from [`default_lambda_max`] and `ratio · lambda_max`.
    pub fn from_data(
        bundle: &GramBundle,
        y: &DVector<f64>,
        level: ExpectileLevel,
        n_lambda: usize,
        ratio: f64,
        fit: FitOptions,
    ) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(KereError::param(
                "lambda ratio",
                format!("must lie in (0, 1), got {ratio}"),
            ));
        }
        let lambda_max = default_lambda_max(bundle, y, level)?;
        PathConfig::new(lambda_max, ratio * lambda_max, n_lambda, fit)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 0.0 && self.lambda_min.is_finite()) {
            return Err(KereError::param(
                "lambda_min",
                format!("must be positive, got {}", self.lambda_min),
            ));
        }
        if !(self.lambda_max > self.lambda_min && self.lambda_max.is_finite()) {
            return Err(KereError::param(
                "lambda_max",
                format!(
                    "must exceed lambda_min = {}, got {}",
                    self.lambda_min, self.lambda_max
                ),
            ));
        }
        if self.n_lambda < 2 {
            return Err(KereError::param(
                "nlambda",
                format!("must be at least 2, got {}", self.n_lambda),
            ));
        }
        Ok(())
    }

    pub fn lambdas(&self) -> Vec<f64> {
        log_grid(self.lambda_max, self.lambda_min, self.n_lambda)
    }
}

fn log_grid(hi: f64, lo: f64, m: usize) -> Vec<f64> {
    let (a, b) = (hi.ln(), lo.ln());
    (0..m)
        .map(|k| match k {
            0 => hi,
            k if k == m - 1 => lo,
            k => (a + (b - a) * k as f64 / (m - 1) as f64).exp(),
        })
        .collect()
}

/// Descending log-uniform grid with exact endpoints.
pub fn lambda_sequence(config: &PathConfig) -> Result<Vec<f64>> {
    config.validate()?;
    Ok(config.lambdas())
}

/// Smallest value of the doubling sequence `‖y‖²/n · 2^k` at which a short
/// cold-start fit leaves every `|α_i| ≤ 1e-4`.
pub fn default_lambda_max(
    bundle: &GramBundle,
    y: &DVector<f64>,
    level: ExpectileLevel,
) -> Result<f64> {
    let factory = KuInverseFactory::new(bundle, level)?;
    let n = y.len().max(1) as f64;
    let mut lambda = y.norm_squared() / n;
    if !(lambda > 0.0) {
        lambda = 1.0;
    }
    let probe = FitOptions::default().with_max_iter(PROBE_MAX_ITER);
    let zero = Coefficients::zeros(bundle.n());
    for _ in 0..PROBE_MAX_DOUBLINGS {
        let fit = fit_with(&factory, y, lambda, &zero, &probe)?;
        if fit.coefficients.alpha.amax() <= PROBE_ALPHA_TOL {
            return Ok(lambda);
        }
        lambda *= 2.0;
    }
    Err(KereError::param(
        "lambda_max",
        "doubling probe did not shrink the coefficients",
    ))
}

#[derive(Debug, Clone)]
pub struct PathPoint {
    pub lambda: f64,
    pub coefficients: Coefficients,
    pub diagnostics: FitDiagnostics,
}

impl PathPoint {
    pub fn objective(&self) -> f64 {
        self.diagnostics.final_objective()
    }
}

/// Fits in the order of the (descending) λ grid.
#[derive(Debug, Clone)]
pub struct PathResult {
    pub level: ExpectileLevel,
    pub points: Vec<PathPoint>,
}

impl PathResult {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    pub fn total_iterations(&self) -> usize {
        self.points.iter().map(|p| p.diagnostics.iterations).sum()
    }

    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.diagnostics.converged)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Warm-started path on the grid of `config`.
pub fn fit_path(
    bundle: &GramBundle,
    y: &DVector<f64>,
    level: ExpectileLevel,
    config: &PathConfig,
) -> Result<PathResult> {
    let lambdas = lambda_sequence(config)?;
    let factory = KuInverseFactory::new(bundle, level)?;
    fit_path_with(&factory, y, &lambdas, &config.fit)
}

/// Warm-started path over an explicit grid with a prepared factory.
///
/// Non-convergent points are flagged in their diagnostics and the path
/// carries on from them.
pub fn fit_path_with(
    factory: &KuInverseFactory<'_>,
    y: &DVector<f64>,
    lambdas: &[f64],
    options: &FitOptions,
) -> Result<PathResult> {
    let mut current = Coefficients::zeros(factory.bundle().n());
    let mut points = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let fit = fit_with(factory, y, lambda, &current, options)?;
        if !fit.diagnostics.converged {
            log::warn!(
                "path point λ = {lambda:e} did not converge in {} iterations",
                options.max_iter
            );
        }
        current = fit.coefficients.clone();
        points.push(PathPoint {
            lambda,
            coefficients: fit.coefficients,
            diagnostics: fit.diagnostics,
        });
    }
    Ok(PathResult {
        level: factory.level(),
        points,
    })
}
