// A small version of the univariate heteroscedastic study.
//
// Tunes (σ², λ) by cross-validation per level and reports the mean absolute
// deviation from the true conditional expectile on a test sample.
//
// `cargo run --release --example simulation_one`

use kere::sim::study::{sim1_mad_table, sim1_study, StudySettings, Table};
use kere::sim::Sim1Error;

pub fn run_example() -> Result<Table, Box<dyn std::error::Error>> {
    let settings = StudySettings {
        n_train: 60,
        n_test: 200,
        reps: 2,
        levels: vec![0.2, 0.5, 0.8],
        n_lambda: 6,
        ..StudySettings::sim1()
    };
    let outcomes = [Sim1Error::MixedNormal, Sim1Error::Laplace]
        .into_iter()
        .map(|e| sim1_study(e, &settings))
        .collect::<Result<Vec<_>, _>>()?;
    let table = sim1_mad_table(&outcomes);
    print!("{}", table.render());
    Ok(table)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
