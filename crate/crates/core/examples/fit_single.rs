// One fit at a fixed (ω, λ) with a Gaussian kernel.
//
// `cargo run --example fit_single`

use kere::kernel::{matrix_rows, median_pairwise_sq_distance, GramBundle, KernelSpec};
use kere::sim::{sim1_generate, Design, Sim1Error, Sim1Spec};
use kere::{fit, Coefficients, ExpectileLevel, Fit, FitOptions};

pub fn run_example() -> Result<Fit, Box<dyn std::error::Error>> {
    let spec = Sim1Spec::new(80, Sim1Error::MixedNormal, 7)?;
    let (x, y) = sim1_generate(&spec)?;
    let kernel = KernelSpec::rbf(median_pairwise_sq_distance(&x))?;
    let bundle = GramBundle::from_points(&kernel, matrix_rows(&x))?.eigendecompose()?;

    let level = ExpectileLevel::new(0.8)?;
    let options = FitOptions::default()
        .with_max_iter(500)
        .with_rate_bound(true);
    let f = fit(
        &bundle,
        &y,
        level,
        0.05,
        &Coefficients::zeros(bundle.n()),
        &options,
    )?;
    let d = &f.diagnostics;
    println!(
        "converged = {} after {} iterations, F = {:.6}, certificate = {:.2e}",
        d.converged,
        d.iterations,
        d.final_objective(),
        d.stationarity_residual
    );
    if let Some(g) = d.rate_bound {
        println!(
            "linear-rate bound Γ = {g:.4}, worst observed ratio = {:?}",
            d.max_contraction()
        );
    }

    let fitted = f.coefficients.predict(bundle.gram());
    let truth = spec.true_expectiles(&x, level)?;
    let mad = (fitted - truth).abs().mean();
    println!("in-sample mean |f̂ - f| = {mad:.4}");
    Ok(f)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
