use std::path::PathBuf;

use clap::{Args, ValueEnum};
use fluidlevel::calibrate::{fit_linear_2pt, fit_poly_ls, residuals, select_calibration_points};
use fluidlevel::simulate::{region_of, Region};
use fluidlevel::{CalibrationModel, CalibrationPoint, Direction};

use crate::config::RunConfig;
use crate::data::{load_table, ManifestPerimeter};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    /// Exact line through two points.
    Linear2,
    /// Least-squares polynomial.
    Poly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    /// Volume from perimeter (used for measuring).
    P2v,
    /// Perimeter from volume.
    V2p,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::P2v => Direction::PerimeterToVolume,
            DirectionArg::V2p => Direction::VolumeToPerimeter,
        }
    }
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Points CSV (volume_ml,perimeter_px) or a simulator manifest.csv.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Kind::Poly)]
    pub kind: Kind,
    /// Polynomial order for --kind poly.
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    #[arg(long, value_enum, default_value_t = DirectionArg::P2v)]
    pub direction: DirectionArg,
    /// Fit every manifest row instead of two points per region A, B, C.
    #[arg(long)]
    pub all_points: bool,
    /// Take manifest perimeters from the simulator instead of measuring frames.
    #[arg(long)]
    pub use_expected: bool,
    /// Model output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "")]
    pub well_id: String,
    /// Creation timestamp to record instead of the current time.
    #[arg(long)]
    pub created_utc: Option<String>,
}

pub fn run(cfg: RunConfig, args: CalibrateArgs) -> Result<()> {
    cfg.validate()?;
    let out = args
        .out
        .or(cfg.output.clone())
        .ok_or_else(|| CliError::config("calibrate needs --out or an output in the config"))?;
    let mode = if args.use_expected {
        ManifestPerimeter::Expected
    } else {
        ManifestPerimeter::Measured(&cfg.vision)
    };
    let table = load_table(&args.input, mode)?;
    let profile = &cfg.scene.meniscus;
    let direction = Direction::from(args.direction);

    let all: Vec<CalibrationPoint> = table
        .rows
        .iter()
        .map(|&(v, p)| CalibrationPoint {
            region: Some(region_of(v, profile)),
            ..CalibrationPoint::new(v, p)
        })
        .collect();
    let selected = || select_calibration_points(&table.rows, profile);

    let (model, used) = match args.kind {
        Kind::Linear2 => {
            let pair = if all.len() == 2 {
                all.clone()
            } else {
                // The region-B pair of the region-aware selection.
                selected()?
                    .into_iter()
                    .filter(|p| p.region == Some(Region::B))
                    .collect()
            };
            if pair.len() != 2 {
                return Err(CliError::numeric(format!(
                    "linear2 needs two points, found {}",
                    pair.len()
                )));
            }
            (fit_linear_2pt(&pair[0], &pair[1], direction)?, pair)
        }
        Kind::Poly => {
            let points = if table.manifest && !args.all_points {
                selected()?
            } else {
                all.clone()
            };
            (fit_poly_ls(&points, args.order, direction)?, points)
        }
    };
    let model = finish(model, &args.well_id, args.created_utc);

    let res = residuals(&model, &all);
    let rss: f64 = res.iter().map(|r| r * r).sum();
    let worst = res.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let used_res = residuals(&model, &used);
    let used_worst = used_res.iter().map(|r| r.abs()).fold(0.0, f64::max);
    println!(
        "fitted {} order {} on {} points; all {} rows: rss {rss:.6e}, max |residual| {worst:.6e}; fit points max |residual| {used_worst:.6e}",
        model.kind.as_str(),
        model.order,
        used.len(),
        all.len(),
    );

    std::fs::write(&out, model.to_json() + "\n")
        .map_err(|e| CliError::io(format!("{}: {e}", out.display())))?;
    Ok(())
}

fn finish(mut model: CalibrationModel, well_id: &str, created: Option<String>) -> CalibrationModel {
    model.metadata.well_id = well_id.to_string();
    if let Some(c) = created {
        model.metadata.created_utc = c;
    }
    model
}
