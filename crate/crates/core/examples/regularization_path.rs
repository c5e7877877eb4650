// A warm-started path over a log-uniform λ grid.
//
// `cargo run --example regularization_path`

use kere::kernel::{matrix_rows, GramBundle, KernelSpec};
use kere::path::{fit_path, PathConfig, PathResult};
use kere::sim::{sim1_generate, Sim1Error, Sim1Spec};
use kere::{ExpectileLevel, FitOptions};

pub fn run_example() -> Result<PathResult, Box<dyn std::error::Error>> {
    let (x, y) = sim1_generate(&Sim1Spec::new(60, Sim1Error::Laplace, 11)?)?;
    let bundle =
        GramBundle::from_points(&KernelSpec::rbf(4.0)?, matrix_rows(&x))?.eigendecompose()?;
    let level = ExpectileLevel::new(0.2)?;

    let config = PathConfig::from_data(
        &bundle,
        &y,
        level,
        12,
        1e-4,
        FitOptions::default().with_max_iter(1000),
    )?;
    let path = fit_path(&bundle, &y, level, &config)?;
    for p in &path.points {
        println!(
            "λ = {:>10.4e}  α₀ = {:+.4}  iterations = {:>3}  converged = {}",
            p.lambda, p.coefficients.intercept, p.diagnostics.iterations, p.diagnostics.converged
        );
    }
    println!("total iterations: {}", path.total_iterations());
    Ok(path)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
