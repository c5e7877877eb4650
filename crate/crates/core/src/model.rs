//! Persisted models.
//!
//! A model is the representer expansion `α₀ + Σ α_i K(x_i, ·)` together with
//! the kernel, the input standardisation and the stored support points
//! (already standardised when a transform is present). It is written as one
//! JSON document; `f64` values survive the round trip exactly.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{KereError, Result};
use crate::kernel::{cross_gram, matrix_rows, KernelSpec, Standardizer};
use crate::loss::ExpectileLevel;
use crate::solver::{Coefficients, FitDiagnostics};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Who produced a file and how; embedded in every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub flags: serde_json::Value,
    pub seed: Option<u64>,
}

impl RunMetadata {
    pub fn new(command: impl Into<String>, flags: serde_json::Value, seed: Option<u64>) -> Self {
        RunMetadata {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
            flags,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub certificate: f64,
    pub tol: f64,
    pub rate_bound: Option<f64>,
}

impl From<&FitDiagnostics> for DiagnosticsSummary {
    fn from(d: &FitDiagnostics) -> Self {
        DiagnosticsSummary {
            iterations: d.iterations,
            converged: d.converged,
            objective: d.final_objective(),
            certificate: d.stationarity_residual,
            tol: d.tol,
            rate_bound: d.rate_bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub kernel: KernelSpec,
    pub standardizer: Option<Standardizer>,
    pub feature_names: Vec<String>,
    /// Training inputs in the kernel's coordinates, one row per point.
    pub support: Vec<Vec<f64>>,
    pub alpha0: f64,
    pub alpha: Vec<f64>,
    pub omega: ExpectileLevel,
    pub lambda: f64,
    pub diagnostics: DiagnosticsSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<RunMetadata>,
}

impl ModelFile {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kernel: KernelSpec,
        standardizer: Option<Standardizer>,
        feature_names: Vec<String>,
        support: &DMatrix<f64>,
        coefficients: &Coefficients,
        omega: ExpectileLevel,
        lambda: f64,
        diagnostics: &FitDiagnostics,
    ) -> Result<Self> {
        let model = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            kernel,
            standardizer,
            feature_names,
            support: matrix_rows(support),
            alpha0: coefficients.intercept,
            alpha: coefficients.alpha.iter().copied().collect(),
            omega,
            lambda,
            diagnostics: diagnostics.into(),
            metadata: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_metadata(mut self, metadata: RunMetadata) -> Self {
        self.metadata = Some(metadata);
        self
    }

    pub fn dim(&self) -> usize {
        self.support
            .first()
            .map_or(self.feature_names.len(), Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(KereError::Unsupported(format!(
                "model format version {} (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.alpha.len() != self.support.len() {
            return Err(KereError::DimensionMismatch {
                context: "model coefficients vs support points",
                expected: self.support.len(),
                actual: self.alpha.len(),
            });
        }
        let p = self.dim();
        if let Some(bad) = self.support.iter().find(|r| r.len() != p) {
            return Err(KereError::DimensionMismatch {
                context: "model support point",
                expected: p,
                actual: bad.len(),
            });
        }
        if let Some(s) = &self.standardizer {
            if s.dim() != p {
                return Err(KereError::DimensionMismatch {
                    context: "model standardizer",
                    expected: p,
                    actual: s.dim(),
                });
            }
        }
        self.kernel.validate()
    }

    /// `α₀ + Σ α_i K(x_i, x)` for each row of `x_new` (raw coordinates).
    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x_new.ncols() != self.dim() {
            return Err(KereError::DimensionMismatch {
                context: "prediction inputs",
                expected: self.dim(),
                actual: x_new.ncols(),
            });
        }
        let x = match &self.standardizer {
            Some(s) => s.apply(x_new)?,
            None => x_new.clone(),
        };
        let cross = cross_gram(&self.kernel, &matrix_rows(&x), &self.support)?;
        let alpha = DVector::from_column_slice(&self.alpha);
        Ok((cross * alpha).add_scalar(self.alpha0))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: ModelFile = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// [`ModelFile::predict`].
pub fn predict(model: &ModelFile, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
    model.predict(x_new)
}
