//! `fluidlevel`: simulate, analyze, calibrate, measure and evaluate.
//!
//! Settings come from an optional JSON config (`--config`); flags given on
//! the command line take precedence over the file. Exit codes: 0 success,
//! 2 config or model error, 3 I/O error, 4 no data, 5 fit or numeric failure.

mod commands;
mod config;
mod data;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use crate::commands::{analyze, calibrate, evaluate, measure, simulate};
use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "fluidlevel",
    version,
    about = "Fluid volume from the apparent size of a light source seen through a well"
)]
#[command(
    after_help = "Sources: dir:<path>[/<glob>], file:<path>, or an http(s):// MJPEG stream URL.\n\
Exit codes: 0 ok, 2 config/model, 3 I/O, 4 no data, 5 fit/numeric."
)]
struct Cli {
    /// JSON run configuration (scene, vision, stabilizer, model, source, output).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed for rendering; overrides scene.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short = 'v', action = ArgAction::Count, global = true)]
    log_level: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a fill sweep as PGM frames plus manifest.csv.
    Simulate(simulate::SimulateArgs),
    /// Measure the spot in every frame of a source; writes timestamp,cx,cy,a,b,rotation,perimeter.
    Analyze(analyze::AnalyzeArgs),
    /// Fit a calibration model from points or a manifest.
    Calibrate(calibrate::CalibrateArgs),
    /// Stream stabilized volume readings as NDJSON.
    Measure(measure::MeasureArgs),
    /// Error report (µl) of one or more models against truth data.
    Evaluate(evaluate::EvaluateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.log_level {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = RunConfig::load(cli.config.as_deref()).and_then(|mut cfg| {
        if let Some(seed) = cli.seed {
            cfg.scene.seed = seed;
        }
        match cli.command {
            Command::Simulate(a) => simulate::run(cfg, a),
            Command::Analyze(a) => analyze::run(cfg, a),
            Command::Calibrate(a) => calibrate::run(cfg, a),
            Command::Measure(a) => measure::run(cfg, a),
            Command::Evaluate(a) => evaluate::run(cfg, a),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fluidlevel: {e}");
            ExitCode::from(e.code())
        }
    }
}
