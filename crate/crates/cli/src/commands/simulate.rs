use std::path::PathBuf;

use clap::Args;
use fluidlevel::simulate::{write_sweep, DatasetError};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// First volume, ml.
    #[arg(long, default_value_t = 0.2)]
    pub start: f64,
    /// Last volume, ml.
    #[arg(long, default_value_t = 3.0)]
    pub end: f64,
    /// Number of evenly spaced volumes, endpoints included.
    #[arg(long, default_value_t = 57)]
    pub steps: usize,
    /// Output directory for frames and manifest.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Gaussian pixel noise sigma (0-255 scale).
    #[arg(long)]
    pub noise: Option<f64>,
    /// Fraction of the spot covered by occluding blobs.
    #[arg(long)]
    pub occlusion: Option<f64>,
    /// Render a moistened well: a film forms from the first drop.
    #[arg(long)]
    pub prewetted: bool,
}

pub fn run(mut cfg: RunConfig, args: SimulateArgs) -> Result<()> {
    if let Some(n) = args.noise {
        cfg.scene.noise_sigma = n;
    }
    if let Some(o) = args.occlusion {
        cfg.scene.occlusion_fraction = o;
    }
    if args.prewetted {
        cfg.scene.prewetted = true;
    }
    cfg.validate()?;
    let out = args
        .out
        .or(cfg.output)
        .ok_or_else(|| CliError::config("simulate needs --out or an output in the config"))?;
    let entries =
        write_sweep(&cfg.scene, args.start, args.end, args.steps, &out).map_err(|e| match e {
            DatasetError::Scene(e) => CliError::config(e.to_string()),
            e @ DatasetError::Io { .. } => CliError::io(e.to_string()),
        })?;
    log::info!(
        "wrote {} frames and manifest.csv to {}",
        entries.len(),
        out.display()
    );
    Ok(())
}
