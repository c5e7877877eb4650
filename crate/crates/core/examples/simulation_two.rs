// Random-function designs in several dimensions.
//
// Draws a sum of random Gaussian bumps as the mean (and, in the
// heteroscedastic model, a second one as the scale), then reports the
// mean absolute deviation of tuned fits.
//
// `cargo run --release --example simulation_two`

use kere::sim::random_function;
use kere::sim::study::{sim2_mad_table, sim2_study, StudySettings, Table};
use kere::sim::Sim2Error;

pub fn run_example() -> Result<Table, Box<dyn std::error::Error>> {
    let f = random_function(3, 1)?;
    println!(
        "f(0) = {:.4} for a {}-term random function",
        f.eval(&[0.0; 3])?,
        f.terms.len()
    );

    let settings = StudySettings {
        n_train: 60,
        n_test: 150,
        reps: 1,
        p: 3,
        levels: vec![0.1, 0.5, 0.9],
        n_lambda: 6,
        ..StudySettings::sim2()
    };
    let outcomes = [false, true]
        .into_iter()
        .map(|hetero| sim2_study(hetero, &Sim2Error::Normal, &settings))
        .collect::<Result<Vec<_>, _>>()?;
    let table = sim2_mad_table(&outcomes);
    print!("{}", table.render());
    Ok(table)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
