// The asymmetric squared loss and population expectiles.
//
// `cargo run --example expectile_basics`

use kere::loss::{population_expectile, ExpectileLevel, ScalarDistribution};

pub fn run_example() -> Result<Vec<(f64, f64)>, Box<dyn std::error::Error>> {
    let level = ExpectileLevel::new(0.9)?;
    for t in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        println!(
            "t = {t:+.1}  φ = {:.4}  φ' = {:+.4}",
            level.loss(t),
            level.derivative(t)
        );
    }
    println!("Lipschitz constant of φ': {}", level.lipschitz());

    let normal = ScalarDistribution::normal(0.0, 1.0)?;
    let mut table = Vec::new();
    for w in [0.05, 0.25, 0.5, 0.75, 0.95] {
        let b = population_expectile(&normal, ExpectileLevel::new(w)?, 1e-12)?;
        println!("N(0,1) expectile at ω = {w}: {b:+.6}");
        table.push((w, b));
    }
    Ok(table)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
