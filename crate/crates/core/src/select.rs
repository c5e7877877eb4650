//! K-fold cross-validation over `(σ², λ)` for the RBF kernel.
//!
//! Each `(σ², fold)` cell builds and decomposes one training Gram matrix and
//! runs a warm-started path over the shared λ grid. Cells are independent and
//! run on the rayon pool; results are merged in a fixed order, so the outcome
//! does not depend on scheduling.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KereError, Result};
use crate::kernel::{matrix_rows, median_pairwise_sq_distance, GramBundle, KernelSpec};
use crate::loss::ExpectileLevel;
use crate::path::{fit_path_with, PathConfig, PathResult};
use crate::solver::KuInverseFactory;

/// Multipliers of the median pairwise squared distance in the default σ² grid.
pub const DEFAULT_SIGMA2_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const DEFAULT_FOLDS: usize = 5;
/// Relative slack under which two CV losses count as tied.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub sigma2_grid: Vec<f64>,
    pub path: PathConfig,
    pub seed: u64,
    pub level: ExpectileLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub level: ExpectileLevel,
    pub sigma2_grid: Vec<f64>,
    /// Descending λ grid shared by every σ².
    pub lambdas: Vec<f64>,
    /// `cv_loss[s][l]`: mean over folds of the mean held-out loss.
    pub cv_loss: Vec<Vec<f64>>,
    /// Standard error of the fold losses.
    pub std_error: Vec<Vec<f64>>,
    /// False when any fold failed to converge at that cell.
    pub valid: Vec<Vec<bool>>,
    pub best_sigma2: f64,
    pub best_lambda: f64,
    pub best_cell: (usize, usize),
    pub folds: usize,
    pub fold_assignment: Vec<usize>,
    pub fold_sizes: Vec<usize>,
    pub seed: u64,
}

impl CvResult {
    pub fn best_loss(&self) -> f64 {
        self.cv_loss[self.best_cell.0][self.best_cell.1]
    }
}

/// Fold labels in `0..k`, balanced to within one, from a seeded shuffle.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(KereError::param(
            "folds",
            format!("need at least 2 folds, got {k}"),
        ));
    }
    if k > n {
        return Err(KereError::param(
            "folds",
            format!("{k} folds for {n} observations"),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut labels = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = pos % k;
    }
    Ok(labels)
}

/// `{0.25, 0.5, 1, 2, 4} ×` the median pairwise squared distance of the rows of `x`.
pub fn default_sigma2_grid(x: &DMatrix<f64>) -> Vec<f64> {
    let med = median_pairwise_sq_distance(x);
    let med = if med > 0.0 { med } else { 1.0 };
    DEFAULT_SIGMA2_MULTIPLIERS.iter().map(|q| q * med).collect()
}

fn validate_inputs(x: &DMatrix<f64>, y: &DVector<f64>, sigma2_grid: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(KereError::DimensionMismatch {
            context: "features vs response",
            expected: y.len(),
            actual: x.nrows(),
        });
    }
    if sigma2_grid.is_empty() {
        return Err(KereError::param("sigma2_grid", "empty grid"));
    }
    for &s in sigma2_grid {
        KernelSpec::rbf(s)?;
    }
    Ok(())
}

fn split_rows(
    rows: &[Vec<f64>],
    y: &DVector<f64>,
    assignment: &[usize],
    fold: usize,
) -> (Vec<Vec<f64>>, DVector<f64>, Vec<Vec<f64>>, DVector<f64>) {
    let (mut tx, mut ty, mut hx, mut hy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, row) in rows.iter().enumerate() {
        if assignment[i] == fold {
            hx.push(row.clone());
            hy.push(y[i]);
        } else {
            tx.push(row.clone());
            ty.push(y[i]);
        }
    }
    (tx, DVector::from_vec(ty), hx, DVector::from_vec(hy))
}

/// The path fitted on every observation outside `fold`; held-out responses
/// are never read.
pub fn fit_fold_path(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    assignment: &[usize],
    fold: usize,
    kernel: &KernelSpec,
    level: ExpectileLevel,
    config: &PathConfig,
) -> Result<PathResult> {
    if assignment.len() != y.len() || x.nrows() != y.len() {
        return Err(KereError::DimensionMismatch {
            context: "fold assignment",
            expected: y.len(),
            actual: assignment.len(),
        });
    }
    let rows = matrix_rows(x);
    let (tx, ty, _, _) = split_rows(&rows, y, assignment, fold);
    let bundle = GramBundle::from_points(kernel, tx)?.eigendecompose()?;
    let factory = KuInverseFactory::new(&bundle, level)?;
    fit_path_with(&factory, &ty, &config.lambdas(), &config.fit)
}

/// Held-out loss and convergence flag per λ, one entry per target.
type CellOutcome = Vec<Vec<(f64, bool)>>;

fn run_cell(
    rows: &[Vec<f64>],
    y: &DVector<f64>,
    assignment: &[usize],
    fold: usize,
    sigma2: f64,
    targets: &[(ExpectileLevel, PathConfig)],
) -> Result<CellOutcome> {
    let kernel = KernelSpec::rbf(sigma2)?;
    let (tx, ty, hx, hy) = split_rows(rows, y, assignment, fold);
    let bundle = GramBundle::from_points(&kernel, tx)?.eigendecompose()?;
    let cross = bundle.cross_gram(&hx)?;
    targets
        .iter()
        .map(|(level, config)| {
            let factory = KuInverseFactory::new(&bundle, *level)?;
            let path = fit_path_with(&factory, &ty, &config.lambdas(), &config.fit)?;
            Ok(path
                .points
                .iter()
                .map(|p| {
                    let pred = p.coefficients.predict(&cross);
                    let loss = hy
                        .iter()
                        .zip(pred.iter())
                        .map(|(a, b)| level.loss(a - b))
                        .sum::<f64>()
                        / hy.len() as f64;
                    (loss, p.diagnostics.converged)
                })
                .collect())
        })
        .collect()
}

/// Cross-validation at a single level.
pub fn cross_validate(x: &DMatrix<f64>, y: &DVector<f64>, config: &CvConfig) -> Result<CvResult> {
    let mut out = cross_validate_levels(
        x,
        y,
        config.folds,
        &config.sigma2_grid,
        config.seed,
        &[(config.level, config.path)],
    )?;
    Ok(out.remove(0))
}

/// Cross-validation at several levels sharing folds and Gram eigendecompositions.
///
/// Every target brings its own λ grid; callers that derive the grid from
/// data should do so on the full sample before calling.
pub fn cross_validate_levels(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    folds: usize,
    sigma2_grid: &[f64],
    seed: u64,
    targets: &[(ExpectileLevel, PathConfig)],
) -> Result<Vec<CvResult>> {
    validate_inputs(x, y, sigma2_grid)?;
    for (_, cfg) in targets {
        cfg.validate()?;
    }
    let n = y.len();
    let assignment = kfold_split(n, folds, seed)?;
    let rows = matrix_rows(x);
    let cells: Vec<(usize, usize)> = (0..sigma2_grid.len())
        .flat_map(|s| (0..folds).map(move |f| (s, f)))
        .collect();
    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|&(s, f)| run_cell(&rows, y, &assignment, f, sigma2_grid[s], targets))
        .collect::<Result<_>>()?;

    let mut fold_sizes = vec![0; folds];
    for &a in &assignment {
        fold_sizes[a] += 1;
    }

    targets
        .iter()
        .enumerate()
        .map(|(t, (level, config))| {
            let lambdas = config.lambdas();
            let m = lambdas.len();
            let mut cv_loss = vec![vec![0.0; m]; sigma2_grid.len()];
            let mut std_error = vec![vec![0.0; m]; sigma2_grid.len()];
            let mut valid = vec![vec![true; m]; sigma2_grid.len()];
            for s in 0..sigma2_grid.len() {
                for l in 0..m {
                    let per_fold: Vec<(f64, bool)> =
                        (0..folds).map(|f| outcomes[s * folds + f][t][l]).collect();
                    let k = folds as f64;
                    let mean = per_fold.iter().map(|p| p.0).sum::<f64>() / k;
                    let var =
                        per_fold.iter().map(|p| (p.0 - mean).powi(2)).sum::<f64>() / (k - 1.0);
                    cv_loss[s][l] = mean;
                    std_error[s][l] = (var / k).sqrt();
                    valid[s][l] = per_fold.iter().all(|p| p.1);
                }
            }
            let (bs, bl) = select_best(&cv_loss, &valid, sigma2_grid, &lambdas)?;
            Ok(CvResult {
                level: *level,
                sigma2_grid: sigma2_grid.to_vec(),
                best_sigma2: sigma2_grid[bs],
                best_lambda: lambdas[bl],
                lambdas,
                cv_loss,
                std_error,
                valid,
                best_cell: (bs, bl),
                folds,
                fold_assignment: assignment.clone(),
                fold_sizes: fold_sizes.clone(),
                seed,
            })
        })
        .collect()
}

/// Minimum over valid cells; ties go to the largest λ, then the smallest σ².
fn select_best(
    cv_loss: &[Vec<f64>],
    valid: &[Vec<bool>],
    sigma2_grid: &[f64],
    lambdas: &[f64],
) -> Result<(usize, usize)> {
    let mut min = f64::INFINITY;
    for (s, row) in cv_loss.iter().enumerate() {
        for (l, &v) in row.iter().enumerate() {
            if valid[s][l] && v < min {
                min = v;
            }
        }
    }
    if !min.is_finite() {
        return Err(KereError::AllCellsNonConvergent);
    }
    let slack = TIE_TOL * (1.0 + min.abs());
    let mut best: Option<(usize, usize)> = None;
    for (s, row) in cv_loss.iter().enumerate() {
        for (l, &v) in row.iter().enumerate() {
            if !valid[s][l] || v > min + slack {
                continue;
            }
            best = match best {
                None => Some((s, l)),
                Some((bs, bl)) => {
                    let better = lambdas[l] > lambdas[bl]
                        || (lambdas[l] == lambdas[bl] && sigma2_grid[s] < sigma2_grid[bs]);
                    Some(if better { (s, l) } else { (bs, bl) })
                }
            };
        }
    }
    Ok(best.expect("minimum exists"))
}
