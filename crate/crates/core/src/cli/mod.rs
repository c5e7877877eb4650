//! The `kere` command line.
//!
//! Every command validates its flags before computing, writes its primary
//! output plus a `<file>.meta.json` sidecar (tool version, flags, seed) and
//! exits 0. Failures print `{"error": {"kind", "message"}}` on stderr and
//! exit 1 (2 for usage errors). Non-convergence is a warning and a flag in
//! the output, not a failure.

mod args;
mod commands;

pub use args::*;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Serialize;

use crate::error::{KereError, Result};
use crate::model::RunMetadata;

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            report("usage", &e.render().to_string());
            return 2;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            report(e.kind(), &e.to_string());
            1
        }
    }
}

fn report(kind: &str, message: &str) {
    let body = serde_json::json!({ "error": { "kind": kind, "message": message.trim_end() } });
    eprintln!("{body}");
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => commands::fit(a, &cli.command),
        Command::Path(a) => commands::path(a, &cli.command),
        Command::Cv(a) => commands::cv(a, &cli.command),
        Command::Predict(a) => commands::predict(a, &cli.command),
        Command::Simulate { design } => match design {
            SimulateCommand::Sim1(a) => commands::simulate_sim1(a, &cli.command),
            SimulateCommand::Sim2(a) => commands::simulate_sim2(a, &cli.command),
        },
        Command::Bench { study } => match study {
            BenchCommand::Sim1(a) => commands::bench_sim1(a, &cli.command),
            BenchCommand::Sim2(a) => commands::bench_sim2(a, &cli.command),
            BenchCommand::SampleSize(a) => commands::bench_sample_size(a, &cli.command),
        },
    }
}

fn command_name(cmd: &Command) -> String {
    match cmd {
        Command::Fit(_) => "fit".into(),
        Command::Path(_) => "path".into(),
        Command::Cv(_) => "cv".into(),
        Command::Predict(_) => "predict".into(),
        Command::Simulate { design } => match design {
            SimulateCommand::Sim1(_) => "simulate sim1".into(),
            SimulateCommand::Sim2(_) => "simulate sim2".into(),
        },
        Command::Bench { study } => match study {
            BenchCommand::Sim1(_) => "bench sim1".into(),
            BenchCommand::Sim2(_) => "bench sim2".into(),
            BenchCommand::SampleSize(_) => "bench sample-size".into(),
        },
    }
}

pub(crate) fn metadata(cmd: &Command, seed: u64) -> Result<RunMetadata> {
    Ok(RunMetadata::new(
        command_name(cmd),
        serde_json::to_value(cmd)?,
        Some(seed),
    ))
}

/// `<path>.meta.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[derive(Serialize)]
struct Sidecar<'a, T: Serialize> {
    #[serde(flatten)]
    meta: &'a RunMetadata,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<&'a T>,
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).map_err(KereError::from)
}

pub(crate) fn write_sidecar<T: Serialize>(
    path: &Path,
    meta: &RunMetadata,
    details: Option<&T>,
) -> Result<()> {
    write_json(&sidecar_path(path), &Sidecar { meta, details })
}

/// 17 significant digits; round-trips every `f64`.
pub(crate) fn num(v: f64) -> String {
    format!("{v:.16e}")
}
