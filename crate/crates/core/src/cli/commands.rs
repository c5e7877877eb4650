use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::args::*;
use super::{metadata, num, write_json, write_sidecar};
use crate::data::{load_csv, load_features, Dataset, ResponseColumn};
use crate::error::{KereError, Result};
use crate::kernel::{
    matrix_rows, median_pairwise_sq_distance, GramBundle, KernelSpec, Standardizer,
};
use crate::loss::ExpectileLevel;
use crate::model::{ModelFile, RunMetadata};
use crate::path::{default_lambda_max, fit_path, PathConfig, DEFAULT_LAMBDA_RATIO};
use crate::select::{cross_validate, default_sigma2_grid, CvConfig};
use crate::sim::study::{
    sample_size_study, sample_size_tables, sim1_curves, sim1_mad_table, sim1_study, sim2_mad_table,
    sim2_study, sim2_timing_table, StudyOutcome, StudySettings, Summary, Table,
};
use crate::sim::{sim1_generate, sim2_generate, Design, Sim1Error, Sim1Spec, Sim2Error, Sim2Spec};
use crate::solver::{fit as fit_model, Coefficients, FitOptions};

struct Prepared {
    data: Dataset,
    scaler: Option<Standardizer>,
    /// Features in kernel coordinates.
    x: DMatrix<f64>,
}

fn prepare(args: &DataArgs) -> Result<Prepared> {
    let response = match &args.response {
        Some(r) => r.parse::<ResponseColumn>().expect("infallible"),
        None => {
            let (header, _) = crate::data::read_numeric_csv(&args.data)?;
            ResponseColumn::Index(header.len().saturating_sub(1))
        }
    };
    let data = load_csv(&args.data, &response)?;
    let (scaler, x) = match args.standardize {
        Toggle::On => {
            let s = Standardizer::fit(&data.x);
            let x = s.apply(&data.x)?;
            (Some(s), x)
        }
        Toggle::Off => (None, data.x.clone()),
    };
    Ok(Prepared { data, scaler, x })
}

fn invalid_combo(flag: &str, kernel: KernelFamily) -> KereError {
    KereError::param(
        "flags",
        format!("--{flag} does not apply to the {kernel:?} kernel"),
    )
}

fn build_kernel(args: &KernelArgs, x: &DMatrix<f64>) -> Result<KernelSpec> {
    let k = args.kernel;
    let forbid = |present: bool, flag: &str| {
        if present {
            Err(invalid_combo(flag, k))
        } else {
            Ok(())
        }
    };
    match k {
        KernelFamily::Rbf => {
            forbid(args.theta.is_some(), "theta")?;
            forbid(args.kappa.is_some(), "kappa")?;
            forbid(args.degree.is_some(), "degree")?;
            let sigma2 = match args.sigma2 {
                Some(s) => s,
                None => {
                    let m = median_pairwise_sq_distance(x);
                    if m > 0.0 {
                        m
                    } else {
                        1.0
                    }
                }
            };
            KernelSpec::rbf(sigma2)
        }
        KernelFamily::Poly => {
            forbid(args.sigma2.is_some(), "sigma2")?;
            forbid(args.kappa.is_some(), "kappa")?;
            KernelSpec::polynomial(args.theta.unwrap_or(1.0), args.degree.unwrap_or(2))
        }
        KernelFamily::Sigmoid => {
            forbid(args.sigma2.is_some(), "sigma2")?;
            forbid(args.degree.is_some(), "degree")?;
            let p = x.ncols().max(1) as f64;
            KernelSpec::sigmoid(args.kappa.unwrap_or(1.0 / p), args.theta.unwrap_or(0.0))
        }
        KernelFamily::Linear => {
            forbid(args.sigma2.is_some(), "sigma2")?;
            forbid(args.theta.is_some(), "theta")?;
            forbid(args.kappa.is_some(), "kappa")?;
            forbid(args.degree.is_some(), "degree")?;
            Ok(KernelSpec::Linear)
        }
    }
}

fn fit_options(args: &SolverArgs, rate_bound: bool) -> FitOptions {
    FitOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        rate_bound,
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(KereError::param(
            "lambda",
            format!("must be positive, got {lambda}"),
        ))
    }
}

fn check_output_dir(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(KereError::Data(format!(
            "output directory {} does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

pub(super) fn fit(args: &FitArgs, cmd: &Command) -> Result<()> {
    let level = ExpectileLevel::new(args.omega)?;
    check_lambda(args.lambda)?;
    check_output_dir(&args.out)?;
    let prep = prepare(&args.data)?;
    let kernel = build_kernel(&args.kernel, &prep.x)?;
    let options = fit_options(&args.solver, args.rate_bound);
    let bundle = GramBundle::from_points(&kernel, matrix_rows(&prep.x))?.eigendecompose()?;
    let fit = fit_model(
        &bundle,
        &prep.data.y,
        level,
        args.lambda,
        &Coefficients::zeros(bundle.n()),
        &options,
    )?;
    if !fit.diagnostics.converged {
        log::warn!(
            "fit did not converge in {} iterations",
            args.solver.max_iter
        );
    }
    let model = ModelFile::new(
        kernel,
        prep.scaler,
        prep.data.feature_names.clone(),
        &prep.x,
        &fit.coefficients,
        level,
        args.lambda,
        &fit.diagnostics,
    )?
    .with_metadata(metadata(cmd, args.seed)?);
    model.save(&args.out)?;
    print_json(&model.diagnostics)
}

fn resolve_grid(
    grid: &GridArgs,
    probe: impl FnOnce() -> Result<f64>,
    fit: FitOptions,
) -> Result<PathConfig> {
    let lambda_max = match grid.lambda_max {
        Some(v) => v,
        None => probe()?,
    };
    let lambda_min = grid.lambda_min.unwrap_or(DEFAULT_LAMBDA_RATIO * lambda_max);
    PathConfig::new(lambda_max, lambda_min, grid.nlambda, fit)
}

fn validate_grid_flags(grid: &GridArgs) -> Result<()> {
    if grid.nlambda < 2 {
        return Err(KereError::param("nlambda", "must be at least 2"));
    }
    if let (Some(hi), Some(lo)) = (grid.lambda_max, grid.lambda_min) {
        PathConfig::new(hi, lo, grid.nlambda, FitOptions::default())?;
    }
    Ok(())
}

pub(super) fn path(args: &PathArgs, cmd: &Command) -> Result<()> {
    let level = ExpectileLevel::new(args.omega)?;
    validate_grid_flags(&args.grid)?;
    check_output_dir(&args.out)?;
    let prep = prepare(&args.data)?;
    let kernel = build_kernel(&args.kernel, &prep.x)?;
    let bundle = GramBundle::from_points(&kernel, matrix_rows(&prep.x))?.eigendecompose()?;
    let probe = || default_lambda_max(&bundle, &prep.data.y, level);
    let config = resolve_grid(
        &args.grid,
        probe,
        fit_options(&args.solver, args.rate_bound),
    )?;
    let result = fit_path(&bundle, &prep.data.y, level, &config)?;

    let mut w = csv::Writer::from_path(&args.out)?;
    w.write_record([
        "lambda",
        "alpha0",
        "objective",
        "iterations",
        "converged",
        "certificate",
        "rate_bound",
    ])?;
    for p in &result.points {
        let d = &p.diagnostics;
        w.write_record([
            num(p.lambda),
            num(p.coefficients.intercept),
            num(p.objective()),
            d.iterations.to_string(),
            d.converged.to_string(),
            num(d.stationarity_residual),
            d.rate_bound.map(num).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    let non_converged = result
        .points
        .iter()
        .filter(|p| !p.diagnostics.converged)
        .count();
    if non_converged > 0 {
        log::warn!(
            "{non_converged} of {} path points did not converge",
            result.len()
        );
    }
    write_sidecar(&args.out, &metadata(cmd, args.seed)?, Some(&config))?;
    print_json(&serde_json::json!({
        "points": result.len(),
        "non_converged": non_converged,
        "total_iterations": result.total_iterations(),
    }))
}

#[derive(Serialize)]
struct BestPair<'a> {
    #[serde(flatten)]
    meta: &'a RunMetadata,
    omega: f64,
    best_sigma2: f64,
    best_lambda: f64,
    best_cv_loss: f64,
    best_std_error: f64,
    folds: usize,
    fold_sizes: &'a [usize],
}

pub(super) fn cv(args: &CvArgs, cmd: &Command) -> Result<()> {
    let level = ExpectileLevel::new(args.omega)?;
    validate_grid_flags(&args.grid)?;
    if let Some(g) = &args.sigma2_grid {
        if g.is_empty() {
            return Err(KereError::param("sigma2-grid", "empty grid"));
        }
        for &s in g {
            KernelSpec::rbf(s)?;
        }
    }
    check_output_dir(&args.out)?;
    let prep = prepare(&args.data)?;
    if args.folds < 2 || args.folds > prep.data.n() {
        return Err(KereError::param(
            "folds",
            format!("need 2 ≤ folds ≤ n = {}", prep.data.n()),
        ));
    }
    let sigma2_grid = args
        .sigma2_grid
        .clone()
        .unwrap_or_else(|| default_sigma2_grid(&prep.x));
    let options = fit_options(&args.solver, false);
    // The λ grid comes from the full sample so every fold shares it.
    let mid = sigma2_grid[sigma2_grid.len() / 2];
    let probe = || {
        let bundle = GramBundle::from_points(&KernelSpec::rbf(mid)?, matrix_rows(&prep.x))?
            .eigendecompose()?;
        default_lambda_max(&bundle, &prep.data.y, level)
    };
    let path = resolve_grid(&args.grid, probe, options)?;
    let config = CvConfig {
        folds: args.folds,
        sigma2_grid,
        path,
        seed: args.seed,
        level,
    };
    let res = cross_validate(&prep.x, &prep.data.y, &config)?;

    let mut w = csv::Writer::from_path(&args.out)?;
    w.write_record(["sigma2", "lambda", "cv_loss", "std_error", "valid"])?;
    for (s, sigma2) in res.sigma2_grid.iter().enumerate() {
        for (l, lambda) in res.lambdas.iter().enumerate() {
            w.write_record([
                num(*sigma2),
                num(*lambda),
                num(res.cv_loss[s][l]),
                num(res.std_error[s][l]),
                res.valid[s][l].to_string(),
            ])?;
        }
    }
    w.flush()?;
    let meta = metadata(cmd, args.seed)?;
    write_sidecar(&args.out, &meta, Some(&config))?;
    let best_path = args.best_out.clone().unwrap_or_else(|| {
        let mut s = args.out.as_os_str().to_owned();
        s.push(".best.json");
        s.into()
    });
    let (bs, bl) = res.best_cell;
    let best = BestPair {
        meta: &meta,
        omega: level.omega(),
        best_sigma2: res.best_sigma2,
        best_lambda: res.best_lambda,
        best_cv_loss: res.best_loss(),
        best_std_error: res.std_error[bs][bl],
        folds: res.folds,
        fold_sizes: &res.fold_sizes,
    };
    write_json(&best_path, &best)?;
    print_json(&serde_json::json!({
        "best_sigma2": res.best_sigma2,
        "best_lambda": res.best_lambda,
        "best_cv_loss": res.best_loss(),
    }))
}

pub(super) fn predict(args: &PredictArgs, cmd: &Command) -> Result<()> {
    check_output_dir(&args.out)?;
    let model = ModelFile::load(&args.model)?;
    if let Some(w) = args.omega {
        let level = ExpectileLevel::new(w)?;
        if level != model.omega {
            return Err(KereError::param(
                "omega",
                format!("model was fitted at ω = {}, not {w}", model.omega),
            ));
        }
    }
    let x = load_features(&args.data, &model.feature_names)?;
    let pred = model.predict(&x)?;
    let mut w = csv::Writer::from_path(&args.out)?;
    w.write_record(["prediction"])?;
    for v in pred.iter() {
        w.write_record([num(*v)])?;
    }
    w.flush()?;
    write_sidecar::<()>(&args.out, &metadata(cmd, args.seed)?, None)
}

fn levels(omegas: &[f64]) -> Result<Vec<ExpectileLevel>> {
    omegas.iter().map(|&w| ExpectileLevel::new(w)).collect()
}

fn write_dataset(
    out: &Path,
    names: Vec<String>,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    truths: &[(ExpectileLevel, DVector<f64>)],
) -> Result<()> {
    let mut w = csv::Writer::from_path(out)?;
    let mut header = names;
    header.push("y".into());
    header.extend(truths.iter().map(|(l, _)| format!("truth_{l}")));
    w.write_record(&header)?;
    for i in 0..y.len() {
        let mut rec: Vec<String> = (0..x.ncols()).map(|j| num(x[(i, j)])).collect();
        rec.push(num(y[i]));
        rec.extend(truths.iter().map(|(_, t)| num(t[i])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub(super) fn simulate_sim1(args: &SimulateSim1Args, cmd: &Command) -> Result<()> {
    let lv = levels(&args.omega)?;
    check_output_dir(&args.out)?;
    let error = match args.error {
        Sim1Noise::Mixed => Sim1Error::MixedNormal,
        Sim1Noise::Laplace => Sim1Error::Laplace,
    };
    let spec = Sim1Spec::new(args.n, error, args.seed)?;
    let (x, y) = sim1_generate(&spec)?;
    let truths = lv
        .iter()
        .map(|&l| Ok((l, spec.true_expectiles(&x, l)?)))
        .collect::<Result<Vec<_>>>()?;
    write_dataset(&args.out, vec!["x".into()], &x, &y, &truths)?;
    write_sidecar(&args.out, &metadata(cmd, args.seed)?, Some(&spec))
}

fn sim2_error(noise: Sim2Noise) -> Sim2Error {
    match noise {
        Sim2Noise::Normal => Sim2Error::Normal,
        Sim2Noise::T4 => Sim2Error::T4,
        Sim2Noise::Mixed => Sim2Error::MixedNormal,
    }
}

pub(super) fn simulate_sim2(args: &SimulateSim2Args, cmd: &Command) -> Result<()> {
    let lv = levels(&args.omega)?;
    check_output_dir(&args.out)?;
    let spec = Sim2Spec::new(
        args.n,
        args.p,
        args.model == Sim2Model::Hetero,
        sim2_error(args.error),
        args.function_seed.unwrap_or(args.seed),
        args.seed,
    )?;
    let (x, y) = sim2_generate(&spec)?;
    let truths = lv
        .iter()
        .map(|&l| Ok((l, spec.true_expectiles(&x, l)?)))
        .collect::<Result<Vec<_>>>()?;
    let names = (1..=args.p).map(|j| format!("x{j}")).collect();
    write_dataset(&args.out, names, &x, &y, &truths)?;
    write_sidecar(&args.out, &metadata(cmd, args.seed)?, Some(&spec))
}

fn settings(
    t: &TuningArgs,
    n: usize,
    n_test: usize,
    omegas: &[f64],
    p: usize,
) -> Result<StudySettings> {
    let s = StudySettings {
        n_train: n,
        n_test,
        reps: t.reps,
        levels: omegas.to_vec(),
        folds: t.folds,
        sigma2_multipliers: t.sigma2_multipliers.clone(),
        n_lambda: t.nlambda,
        lambda_ratio: t.lambda_ratio,
        fit: FitOptions::default()
            .with_tol(t.tol)
            .with_max_iter(t.max_iter),
        master_seed: t.seed,
        seed_stride: t.seed_stride,
        p,
    };
    s.validate()?;
    if !(t.tol > 0.0) {
        return Err(KereError::param("tol", "must be positive"));
    }
    Ok(s)
}

fn emit_tables(
    t: &TuningArgs,
    cmd: &Command,
    mad: &Table,
    timing: &Table,
    details: &impl Serialize,
) -> Result<()> {
    let meta = metadata(cmd, t.seed)?;
    mad.write_csv(std::fs::File::create(&t.out)?)?;
    write_sidecar(&t.out, &meta, Some(details))?;
    print!("{}", mad.render());
    if let Some(path) = &t.timing_out {
        timing.write_csv(std::fs::File::create(path)?)?;
        write_sidecar(path, &meta, Some(details))?;
        print!("{}", timing.render());
    }
    Ok(())
}

fn check_tuning_outputs(t: &TuningArgs) -> Result<()> {
    check_output_dir(&t.out)?;
    if let Some(p) = &t.timing_out {
        check_output_dir(p)?;
    }
    Ok(())
}

pub(super) fn bench_sim1(args: &BenchSim1Args, cmd: &Command) -> Result<()> {
    let s = settings(&args.tuning, args.n, args.n_test, &args.omegas, 1)?;
    check_tuning_outputs(&args.tuning)?;
    if let Some(c) = &args.curves {
        check_output_dir(c)?;
    }
    if args.errors.is_empty() {
        return Err(KereError::param("errors", "need at least one noise family"));
    }
    let families: Vec<Sim1Error> = args
        .errors
        .iter()
        .map(|e| match e {
            Sim1Noise::Mixed => Sim1Error::MixedNormal,
            Sim1Noise::Laplace => Sim1Error::Laplace,
        })
        .collect();
    let outcomes = families
        .iter()
        .map(|&e| sim1_study(e, &s))
        .collect::<Result<Vec<_>>>()?;
    let mad = sim1_mad_table(&outcomes);
    let timing = Table {
        title: "Simulation I: seconds per level".into(),
        row_header: "error".into(),
        columns: vec!["seconds".into()],
        rows: outcomes
            .iter()
            .map(|o| {
                (
                    o.label.clone(),
                    vec![Summary {
                        mean: o.seconds_per_level(),
                        se: 0.0,
                    }],
                )
            })
            .collect(),
        with_se: false,
    };
    emit_tables(&args.tuning, cmd, &mad, &timing, &s)?;
    if let Some(path) = &args.curves {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["error", "x", "level", "predicted", "true"])?;
        for &e in &families {
            for p in sim1_curves(e, &s, args.curve_points)? {
                w.write_record([
                    e.label().to_string(),
                    num(p.x),
                    format!("{}", p.level),
                    num(p.predicted),
                    num(p.truth),
                ])?;
            }
        }
        w.flush()?;
        write_sidecar(path, &metadata(cmd, args.tuning.seed)?, Some(&s))?;
    }
    Ok(())
}

pub(super) fn bench_sim2(args: &BenchSim2Args, cmd: &Command) -> Result<()> {
    let s = settings(&args.tuning, args.n, args.n_test, &args.omegas, args.p)?;
    check_tuning_outputs(&args.tuning)?;
    if args.models.is_empty() || args.errors.is_empty() {
        return Err(KereError::param(
            "models/errors",
            "need at least one of each",
        ));
    }
    let mut outcomes: Vec<StudyOutcome> = Vec::new();
    for m in &args.models {
        for e in &args.errors {
            outcomes.push(sim2_study(*m == Sim2Model::Hetero, &sim2_error(*e), &s)?);
        }
    }
    emit_tables(
        &args.tuning,
        cmd,
        &sim2_mad_table(&outcomes),
        &sim2_timing_table(&outcomes),
        &s,
    )
}

pub(super) fn bench_sample_size(args: &BenchSampleSizeArgs, cmd: &Command) -> Result<()> {
    let smallest = args
        .sizes
        .iter()
        .copied()
        .min()
        .ok_or_else(|| KereError::param("sizes", "empty"))?;
    let s = settings(&args.tuning, smallest, args.n_test, &args.omegas, args.p)?;
    check_tuning_outputs(&args.tuning)?;
    let outcomes = sample_size_study(&args.sizes, &s)?;
    let (mad, timing) = sample_size_tables(&outcomes);
    emit_tables(&args.tuning, cmd, &mad, &timing, &s)
}
