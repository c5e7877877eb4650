// K-fold selection of (σ², λ) for a Gaussian kernel.
//
// `cargo run --example cross_validation`

use kere::path::PathConfig;
use kere::select::{cross_validate, default_sigma2_grid, CvConfig, CvResult};
use kere::sim::{sim1_generate, Sim1Error, Sim1Spec};
use kere::{ExpectileLevel, FitOptions};

pub fn run_example() -> Result<CvResult, Box<dyn std::error::Error>> {
    let (x, y) = sim1_generate(&Sim1Spec::new(80, Sim1Error::MixedNormal, 5)?)?;
    let config = CvConfig {
        folds: 5,
        sigma2_grid: default_sigma2_grid(&x),
        path: PathConfig::new(
            10.0,
            1e-3,
            8,
            FitOptions::default().with_tol(1e-6).with_max_iter(1000),
        )?,
        seed: 42,
        level: ExpectileLevel::new(0.5)?,
    };
    let cv = cross_validate(&x, &y, &config)?;
    for (s, row) in cv.sigma2_grid.iter().zip(&cv.cv_loss) {
        let best = row.iter().copied().fold(f64::INFINITY, f64::min);
        println!("σ² = {s:>8.3}  best CV loss over λ = {best:.4}");
    }
    println!(
        "selected σ² = {:.3}, λ = {:.3e} (CV loss {:.4}, fold sizes {:?})",
        cv.best_sigma2,
        cv.best_lambda,
        cv.best_loss(),
        cv.fold_sizes
    );
    Ok(cv)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
