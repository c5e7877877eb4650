// Save a fitted model as JSON, load it back and predict.
//
// `cargo run --example model_roundtrip`

use kere::kernel::{matrix_rows, GramBundle, KernelSpec, Standardizer};
use kere::model::ModelFile;
use kere::sim::{sim2_generate, Sim2Error, Sim2Spec};
use kere::{fit, Coefficients, ExpectileLevel, FitOptions};

pub fn run_example() -> Result<f64, Box<dyn std::error::Error>> {
    let (x, y) = sim2_generate(&Sim2Spec::new(50, 2, false, Sim2Error::T4, 3, 4)?)?;
    let scaler = Standardizer::fit(&x);
    let xs = scaler.apply(&x)?;
    let kernel = KernelSpec::rbf(2.0)?;
    let bundle = GramBundle::from_points(&kernel, matrix_rows(&xs))?.eigendecompose()?;
    let level = ExpectileLevel::new(0.75)?;
    let f = fit(
        &bundle,
        &y,
        level,
        0.1,
        &Coefficients::zeros(50),
        &FitOptions::default().with_max_iter(1000),
    )?;

    let model = ModelFile::new(
        kernel,
        Some(scaler),
        vec!["x1".into(), "x2".into()],
        &xs,
        &f.coefficients,
        level,
        0.1,
        &f.diagnostics,
    )?;
    let path = std::env::temp_dir().join(format!("kere-model-{}.json", std::process::id()));
    model.save(&path)?;
    let back = ModelFile::load(&path)?;
    std::fs::remove_file(&path)?;
    assert_eq!(back, model);

    let gap = (back.predict(&x)? - f.coefficients.predict(bundle.gram())).amax();
    println!("reloaded model reproduces in-sample fit to {gap:.2e}");
    Ok(gap)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
