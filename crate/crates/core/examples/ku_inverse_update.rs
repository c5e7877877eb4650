// The λ-dependent system inverse from one eigendecomposition.
//
// Builds `K_u(λ)⁻¹` through the spectral/rank-one chain and compares it
// with a direct dense inverse for a few λ.
//
// `cargo run --example ku_inverse_update`

use kere::kernel::{matrix_rows, GramBundle, KernelSpec};
use kere::solver::KuInverseFactory;
use kere::ExpectileLevel;
use nalgebra::DMatrix;

pub fn run_example() -> Result<Vec<f64>, Box<dyn std::error::Error>> {
    let x = DMatrix::from_fn(30, 2, |i, j| {
        if j == 0 {
            i as f64 / 10.0
        } else {
            (i as f64).sin()
        }
    });
    let bundle =
        GramBundle::from_points(&KernelSpec::rbf(0.5)?, matrix_rows(&x))?.eigendecompose()?;
    let factory = KuInverseFactory::new(&bundle, ExpectileLevel::new(0.3)?)?;

    let mut errors = Vec::new();
    for lambda in [1.0, 0.1, 0.01] {
        let chain = factory.dense_inverse(lambda)?;
        let direct = factory
            .dense_ku(lambda)
            .try_inverse()
            .ok_or("K_u(λ) is singular")?;
        let rel = (&chain - &direct).amax() / direct.amax();
        println!("λ = {lambda:<5} max relative difference = {rel:.2e}");
        errors.push(rel);
    }
    Ok(errors)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
