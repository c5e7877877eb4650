//! Replicated simulation studies: tune by cross-validation, refit, score
//! against the true expectile surface on a fresh test sample.
//!
//! Every replication is a pure function of the settings and its replication
//! index; seeds are `master_seed + stride · rep`, split into independent
//! streams for training data, test data, folds and random functions.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KereError, Result};
use crate::kernel::{
    matrix_rows, median_pairwise_sq_distance, GramBundle, KernelSpec, Standardizer,
};
use crate::loss::ExpectileLevel;
use crate::path::{fit_path_with, PathConfig};
use crate::select::{cross_validate_levels, DEFAULT_FOLDS, DEFAULT_SIGMA2_MULTIPLIERS};
use crate::sim::{
    mad, sim1_generate, sim2_generate, Design, Sim1Error, Sim1Spec, Sim2Error, Sim2Spec,
};
use crate::solver::{FitOptions, KuInverseFactory};

pub const SIM1_LEVELS: [f64; 5] = [0.05, 0.2, 0.5, 0.8, 0.95];
pub const SIM2_LEVELS: [f64; 7] = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95];
pub const SAMPLE_SIZE_LEVELS: [f64; 3] = [0.1, 0.5, 0.9];
pub const SAMPLE_SIZES: [usize; 4] = [250, 500, 750, 1000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySettings {
    pub n_train: usize,
    pub n_test: usize,
    pub reps: usize,
    pub levels: Vec<f64>,
    pub folds: usize,
    pub sigma2_multipliers: Vec<f64>,
    pub n_lambda: usize,
    /// `lambda_min / lambda_max` of every CV grid.
    pub lambda_ratio: f64,
    pub fit: FitOptions,
    pub master_seed: u64,
    pub seed_stride: u64,
    /// Input dimension (Simulation II only).
    pub p: usize,
}

impl StudySettings {
    fn base(n_train: usize, n_test: usize, levels: &[f64]) -> Self {
        StudySettings {
            n_train,
            n_test,
            reps: 20,
            levels: levels.to_vec(),
            folds: DEFAULT_FOLDS,
            sigma2_multipliers: DEFAULT_SIGMA2_MULTIPLIERS.to_vec(),
            n_lambda: 15,
            lambda_ratio: 1e-7,
            fit: FitOptions::default().with_tol(1e-6).with_max_iter(1000),
            master_seed: 1,
            seed_stride: 1000,
            p: 10,
        }
    }

    /// `n = 400`, `n' = 2000`, five levels.
    pub fn sim1() -> Self {
        Self::base(400, 2000, &SIM1_LEVELS)
    }

    /// `n = 300`, `n' = 1200`, seven levels, `p = 10`.
    pub fn sim2() -> Self {
        Self::base(300, 1200, &SIM2_LEVELS)
    }

    /// `n' = 2000`, levels 0.1, 0.5, 0.9; `n_train` is set per column.
    pub fn sample_size() -> Self {
        Self::base(250, 2000, &SAMPLE_SIZE_LEVELS)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train < self.folds || self.n_test == 0 || self.reps == 0 {
            return Err(KereError::param(
                "study",
                "need n ≥ folds, n' ≥ 1 and reps ≥ 1",
            ));
        }
        if self.levels.is_empty() || self.sigma2_multipliers.is_empty() {
            return Err(KereError::param("study", "empty level or σ² grid"));
        }
        for &w in &self.levels {
            ExpectileLevel::new(w)?;
        }
        if !(self.lambda_ratio > 0.0 && self.lambda_ratio < 1.0) {
            return Err(KereError::param(
                "lambda ratio",
                format!("must lie in (0, 1), got {}", self.lambda_ratio),
            ));
        }
        if self.n_lambda < 2 {
            return Err(KereError::param("nlambda", "must be at least 2"));
        }
        Ok(())
    }

    pub fn replication_seed(&self, rep: usize) -> u64 {
        self.master_seed
            .wrapping_add(self.seed_stride.wrapping_mul(rep as u64))
    }

    fn parsed_levels(&self) -> Vec<ExpectileLevel> {
        self.levels
            .iter()
            .map(|&w| ExpectileLevel::new(w).expect("validated"))
            .collect()
    }
}

/// Independent sub-seed for stream `tag` (SplitMix64 finaliser).
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base.wrapping_add(tag.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const TAG_TRAIN: u64 = 1;
const TAG_TEST: u64 = 2;
const TAG_FOLDS: u64 = 3;
const TAG_FUNCTIONS: u64 = 4;

/// The tuned model at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedLevel {
    pub level: ExpectileLevel,
    pub sigma2: f64,
    pub lambda: f64,
    pub cv_loss: f64,
    /// Convergence of the final refit.
    pub converged: bool,
}

/// Output of [`tune_and_predict`].
#[derive(Debug, Clone)]
pub struct TunedPredictions {
    pub tuned: Vec<TunedLevel>,
    /// Test-set predictions per level.
    pub predictions: Vec<DVector<f64>>,
    pub seconds: f64,
}

/// Standardises the inputs, picks `(σ², λ)` per level by k-fold CV on the
/// training data, refits on all of it and predicts at `x_test`.
///
/// The λ grid for each level runs from the doubling-probe `λ_max` (computed
/// on the full training sample at the median σ²) down to
/// `lambda_ratio · λ_max`.
pub fn tune_and_predict(
    x_train: &DMatrix<f64>,
    y_train: &DVector<f64>,
    x_test: &DMatrix<f64>,
    settings: &StudySettings,
    fold_seed: u64,
) -> Result<TunedPredictions> {
    settings.validate()?;
    let start = Instant::now();
    let levels = settings.parsed_levels();
    let scaler = Standardizer::fit(x_train);
    let xs = scaler.apply(x_train)?;
    let xt = scaler.apply(x_test)?;
    let median = median_pairwise_sq_distance(&xs);
    let median = if median > 0.0 { median } else { 1.0 };
    let sigma2_grid: Vec<f64> = settings
        .sigma2_multipliers
        .iter()
        .map(|q| q * median)
        .collect();

    let train_rows = matrix_rows(&xs);
    let probe_bundle =
        GramBundle::from_points(&KernelSpec::rbf(median)?, train_rows.clone())?.eigendecompose()?;
    let targets: Vec<(ExpectileLevel, PathConfig)> = levels
        .iter()
        .map(|&level| {
            let cfg = PathConfig::from_data(
                &probe_bundle,
                y_train,
                level,
                settings.n_lambda,
                settings.lambda_ratio,
                settings.fit,
            )?;
            Ok((level, cfg))
        })
        .collect::<Result<_>>()?;
    drop(probe_bundle);

    let cv = cross_validate_levels(
        &xs,
        y_train,
        settings.folds,
        &sigma2_grid,
        fold_seed,
        &targets,
    )?;

    let test_rows = matrix_rows(&xt);
    let mut bundles: Vec<Option<(GramBundle, DMatrix<f64>)>> = vec![None; sigma2_grid.len()];
    let mut tuned = Vec::with_capacity(levels.len());
    let mut predictions = Vec::with_capacity(levels.len());
    for (res, (level, cfg)) in cv.iter().zip(targets.iter()) {
        let (s, l) = res.best_cell;
        if bundles[s].is_none() {
            let b = GramBundle::from_points(&KernelSpec::rbf(sigma2_grid[s])?, train_rows.clone())?
                .eigendecompose()?;
            let cross = b.cross_gram(&test_rows)?;
            bundles[s] = Some((b, cross));
        }
        let (bundle, cross) = bundles[s].as_ref().expect("filled above");
        let factory = KuInverseFactory::new(bundle, *level)?;
        let lambdas = cfg.lambdas();
        let path = fit_path_with(&factory, y_train, &lambdas[..=l], &cfg.fit)?;
        let last = path.points.last().expect("non-empty grid");
        predictions.push(last.coefficients.predict(cross));
        tuned.push(TunedLevel {
            level: *level,
            sigma2: sigma2_grid[s],
            lambda: lambdas[l],
            cv_loss: res.best_loss(),
            converged: last.diagnostics.converged,
        });
    }
    Ok(TunedPredictions {
        tuned,
        predictions,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub rep: usize,
    pub seed: u64,
    /// One MAD per level, in settings order.
    pub mads: Vec<f64>,
    pub tuned: Vec<TunedLevel>,
    /// Wall time of tuning and refitting, all levels together.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub label: String,
    pub n_train: usize,
    pub levels: Vec<f64>,
    pub replications: Vec<ReplicationOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
}

fn summarize(values: &[f64]) -> Summary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let se = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Summary { mean, se }
}

impl StudyOutcome {
    /// Mean and standard error of the MAD at level index `k`.
    pub fn mad_summary(&self, k: usize) -> Summary {
        let v: Vec<f64> = self.replications.iter().map(|r| r.mads[k]).collect();
        summarize(&v)
    }

    pub fn mad_summaries(&self) -> Vec<Summary> {
        (0..self.levels.len())
            .map(|k| self.mad_summary(k))
            .collect()
    }

    /// Average wall time per replication divided evenly over the levels,
    /// which share folds and eigendecompositions.
    pub fn seconds_per_level(&self) -> f64 {
        let total: f64 = self.replications.iter().map(|r| r.seconds).sum();
        total / (self.replications.len() as f64 * self.levels.len() as f64)
    }
}

fn score(
    design: &impl Design,
    x_test: &DMatrix<f64>,
    tuned: &TunedPredictions,
) -> Result<Vec<f64>> {
    tuned
        .tuned
        .iter()
        .zip(tuned.predictions.iter())
        .map(|(t, pred)| {
            let truth = design.true_expectiles(x_test, t.level)?;
            mad(pred.as_slice(), truth.as_slice())
        })
        .collect()
}

/// One Simulation I replication.
pub fn sim1_replication(
    error: Sim1Error,
    settings: &StudySettings,
    rep: usize,
) -> Result<ReplicationOutcome> {
    let seed = settings.replication_seed(rep);
    let train = Sim1Spec::new(settings.n_train, error, derive_seed(seed, TAG_TRAIN))?;
    let test = Sim1Spec::new(settings.n_test, error, derive_seed(seed, TAG_TEST))?;
    let (x, y) = sim1_generate(&train)?;
    let (xt, _) = sim1_generate(&test)?;
    let tuned = tune_and_predict(&x, &y, &xt, settings, derive_seed(seed, TAG_FOLDS))?;
    Ok(ReplicationOutcome {
        rep,
        seed,
        mads: score(&test, &xt, &tuned)?,
        tuned: tuned.tuned,
        seconds: tuned.seconds,
    })
}

/// One Simulation II replication. Random functions are redrawn per
/// replication from a seed shared by both noise models.
pub fn sim2_replication(
    heteroscedastic: bool,
    error: &Sim2Error,
    settings: &StudySettings,
    rep: usize,
) -> Result<ReplicationOutcome> {
    let seed = settings.replication_seed(rep);
    let fseed = derive_seed(seed, TAG_FUNCTIONS);
    let p = settings.p;
    let train = Sim2Spec::new(
        settings.n_train,
        p,
        heteroscedastic,
        error.clone(),
        fseed,
        derive_seed(seed, TAG_TRAIN),
    )?;
    let test = Sim2Spec::new(
        settings.n_test,
        p,
        heteroscedastic,
        error.clone(),
        fseed,
        derive_seed(seed, TAG_TEST),
    )?;
    let (x, y) = sim2_generate(&train)?;
    let (xt, _) = sim2_generate(&test)?;
    let tuned = tune_and_predict(&x, &y, &xt, settings, derive_seed(seed, TAG_FOLDS))?;
    Ok(ReplicationOutcome {
        rep,
        seed,
        mads: score(&test, &xt, &tuned)?,
        tuned: tuned.tuned,
        seconds: tuned.seconds,
    })
}

fn run_reps<F>(label: String, settings: &StudySettings, f: F) -> Result<StudyOutcome>
where
    F: Fn(usize) -> Result<ReplicationOutcome> + Sync,
{
    settings.validate()?;
    let replications = (0..settings.reps)
        .into_par_iter()
        .map(&f)
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyOutcome {
        label,
        n_train: settings.n_train,
        levels: settings.levels.clone(),
        replications,
    })
}

pub fn sim1_study(error: Sim1Error, settings: &StudySettings) -> Result<StudyOutcome> {
    run_reps(error.label().to_string(), settings, |rep| {
        sim1_replication(error, settings, rep)
    })
}

pub fn sim2_study(
    heteroscedastic: bool,
    error: &Sim2Error,
    settings: &StudySettings,
) -> Result<StudyOutcome> {
    let model = if heteroscedastic {
        "Heteroscedastic"
    } else {
        "Homoscedastic"
    };
    run_reps(format!("{model} {}", error.label()), settings, |rep| {
        sim2_replication(heteroscedastic, error, settings, rep)
    })
}

/// Heteroscedastic mixed-normal Simulation II at each training size.
pub fn sample_size_study(sizes: &[usize], settings: &StudySettings) -> Result<Vec<StudyOutcome>> {
    sizes
        .iter()
        .map(|&n| {
            let s = StudySettings {
                n_train: n,
                ..settings.clone()
            };
            let mut out = sim2_study(true, &Sim2Error::MixedNormal, &s)?;
            out.label = format!("n={n}");
            Ok(out)
        })
        .collect()
}

/// A rectangular summary table; cells are `mean` with an optional standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub title: String,
    pub row_header: String,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Summary>)>,
    pub with_se: bool,
}

impl Table {
    /// Tidy CSV: `row, column, mean[, se]`, 17 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.row_header.clone(), "column".into(), "mean".into()];
        if self.with_se {
            header.push("se".into());
        }
        w.write_record(&header)?;
        for (label, cells) in &self.rows {
            for (col, cell) in self.columns.iter().zip(cells) {
                let mut rec = vec![label.clone(), col.clone(), format!("{:.16e}", cell.mean)];
                if self.with_se {
                    rec.push(format!("{:.16e}", cell.se));
                }
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned text rendering, one row per line.
    pub fn render(&self) -> String {
        let fmt = |c: &Summary| {
            if self.with_se {
                format!("{:.3} ({:.3})", c.mean, c.se)
            } else {
                format!("{:.3}", c.mean)
            }
        };
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|(_, cells)| cells.iter().map(fmt).collect())
            .collect();
        let first = self
            .rows
            .iter()
            .map(|(l, _)| l.len())
            .chain([self.row_header.len()])
            .max()
            .unwrap_or(0);
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(j, c)| {
                body.iter()
                    .filter_map(|r| r.get(j))
                    .map(String::len)
                    .chain([c.len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut s = format!("{}\n{:<first$}", self.title, self.row_header);
        for (c, w) in self.columns.iter().zip(&widths) {
            s.push_str(&format!("  {c:>w$}"));
        }
        s.push('\n');
        for ((label, _), cells) in self.rows.iter().zip(&body) {
            s.push_str(&format!("{label:<first$}"));
            for (cell, w) in cells.iter().zip(&widths) {
                s.push_str(&format!("  {cell:>w$}"));
            }
            s.push('\n');
        }
        s
    }
}

fn level_columns(levels: &[f64]) -> Vec<String> {
    levels.iter().map(|w| format!("{w}")).collect()
}

/// Rows: noise families; columns: levels.
pub fn sim1_mad_table(outcomes: &[StudyOutcome]) -> Table {
    Table {
        title: "Simulation I: mean MAD (standard error)".into(),
        row_header: "error".into(),
        columns: outcomes
            .first()
            .map(|o| level_columns(&o.levels))
            .unwrap_or_default(),
        rows: outcomes
            .iter()
            .map(|o| (o.label.clone(), o.mad_summaries()))
            .collect(),
        with_se: true,
    }
}

fn transposed(outcomes: &[StudyOutcome], title: &str, timing: bool) -> Table {
    let levels = outcomes
        .first()
        .map(|o| o.levels.clone())
        .unwrap_or_default();
    let rows = levels
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let cells = outcomes
                .iter()
                .map(|o| {
                    if timing {
                        Summary {
                            mean: o.seconds_per_level(),
                            se: 0.0,
                        }
                    } else {
                        o.mad_summary(k)
                    }
                })
                .collect();
            (format!("{w}"), cells)
        })
        .collect();
    Table {
        title: title.into(),
        row_header: "omega".into(),
        columns: outcomes.iter().map(|o| o.label.clone()).collect(),
        rows,
        with_se: !timing,
    }
}

/// Rows: levels; columns: model × noise family.
pub fn sim2_mad_table(outcomes: &[StudyOutcome]) -> Table {
    transposed(outcomes, "Simulation II: mean MAD (standard error)", false)
}

/// Seconds per level; wall-clock and therefore not reproducible.
pub fn sim2_timing_table(outcomes: &[StudyOutcome]) -> Table {
    transposed(outcomes, "Simulation II: seconds per level", true)
}

/// Rows: levels; columns: training sizes. Returns the error and timing halves.
pub fn sample_size_tables(outcomes: &[StudyOutcome]) -> (Table, Table) {
    (
        transposed(outcomes, "Sample size: mean MAD (standard error)", false),
        transposed(outcomes, "Sample size: seconds per level", true),
    )
}

/// One point of a Figure-1-style curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub level: f64,
    pub predicted: f64,
    pub truth: f64,
}

/// Fitted and true Simulation I expectile curves on an even grid over [-8, 8].
pub fn sim1_curves(
    error: Sim1Error,
    settings: &StudySettings,
    grid_points: usize,
) -> Result<Vec<CurvePoint>> {
    if grid_points < 2 {
        return Err(KereError::param("grid points", "need at least 2"));
    }
    let seed = settings.replication_seed(0);
    let train = Sim1Spec::new(settings.n_train, error, derive_seed(seed, TAG_TRAIN))?;
    let (x, y) = sim1_generate(&train)?;
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| -8.0 + 16.0 * i as f64 / (grid_points - 1) as f64)
        .collect();
    let xg = DMatrix::from_vec(grid_points, 1, grid.clone());
    let tuned = tune_and_predict(&x, &y, &xg, settings, derive_seed(seed, TAG_FOLDS))?;
    let mut out = Vec::with_capacity(grid_points * tuned.tuned.len());
    for (t, pred) in tuned.tuned.iter().zip(tuned.predictions.iter()) {
        let truth = train.true_expectiles(&xg, t.level)?;
        for i in 0..grid_points {
            out.push(CurvePoint {
                x: grid[i],
                level: t.level.omega(),
                predicted: pred[i],
                truth: truth[i],
            });
        }
    }
    Ok(out)
}
