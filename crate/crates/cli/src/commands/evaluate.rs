use std::path::PathBuf;

use clap::Args;
use fluidlevel::calibrate::{error_report, fit_poly_ls, residual_sum_of_squares, ErrorReport};
use fluidlevel::{CalibrationModel, CalibrationPoint, Direction};

use crate::commands::open_output;
use crate::config::{load_model, RunConfig};
use crate::data::{load_table, ManifestPerimeter};
use crate::error::{CliError, Result};

pub const CSV_HEADER: [&str; 13] = [
    "model",
    "kind",
    "order",
    "scope",
    "count",
    "volume_ml",
    "perimeter_px",
    "estimate_ml",
    "error_ul",
    "extrapolated",
    "mae_ul",
    "max_abs_ul",
    "rss",
];

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model JSON to evaluate; repeat for a comparison table.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Also fit perimeter-to-volume polynomials of these orders on --fit-set.
    #[arg(long, value_delimiter = ',')]
    pub fit_orders: Vec<usize>,
    /// Data for --fit-orders; defaults to the truth set.
    #[arg(long)]
    pub fit_set: Option<PathBuf>,
    /// Truth CSV (volume_ml,perimeter_px) or a simulator manifest.csv.
    #[arg(long)]
    pub truth: PathBuf,
    /// Take manifest perimeters from the simulator instead of measuring frames.
    #[arg(long)]
    pub use_expected: bool,
    /// Add per-region aggregate rows.
    #[arg(long)]
    pub by_region: bool,
    /// Only aggregate rows.
    #[arg(long)]
    pub summary_only: bool,
    /// Report CSV path; `-` or absent writes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn points(rows: &[(f64, f64)]) -> Vec<CalibrationPoint> {
    rows.iter()
        .map(|&(v, p)| CalibrationPoint::new(v, p))
        .collect()
}

pub fn run(cfg: RunConfig, args: EvaluateArgs) -> Result<()> {
    cfg.validate()?;
    let mode = if args.use_expected {
        ManifestPerimeter::Expected
    } else {
        ManifestPerimeter::Measured(&cfg.vision)
    };
    let truth = load_table(&args.truth, mode)?;
    if truth.rows.is_empty() {
        return Err(CliError::no_data(format!(
            "{} has no rows",
            args.truth.display()
        )));
    }

    let mut models: Vec<(String, CalibrationModel)> = Vec::new();
    for path in args
        .models
        .iter()
        .chain(cfg.model.iter().filter(|_| args.models.is_empty()))
    {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        models.push((name, load_model(path)?));
    }
    if !args.fit_orders.is_empty() {
        let fit_rows = match &args.fit_set {
            Some(p) => load_table(p, mode)?.rows,
            None => truth.rows.clone(),
        };
        let fit_points = points(&fit_rows);
        for &order in &args.fit_orders {
            let m = fit_poly_ls(&fit_points, order, Direction::PerimeterToVolume)?;
            models.push((format!("fit_order_{order}"), m));
        }
    }
    if models.is_empty() {
        return Err(CliError::config("evaluate needs --model or --fit-orders"));
    }

    let truth_points = points(&truth.rows);
    let mut out =
        csv::Writer::from_writer(open_output(args.out.as_deref().or(cfg.output.as_deref()))?);
    out.write_record(CSV_HEADER)?;
    for (name, model) in &models {
        let report = error_report(model, &truth.rows, Some(&cfg.scene.meniscus))?;
        let rss = residual_sum_of_squares(model, &truth_points);
        write_report(&mut out, name, model, &report, rss, &args)?;
    }
    out.flush().map_err(|e| CliError::io(e.to_string()))?;
    Ok(())
}

fn write_report<W: std::io::Write>(
    out: &mut csv::Writer<W>,
    name: &str,
    model: &CalibrationModel,
    report: &ErrorReport,
    rss: f64,
    args: &EvaluateArgs,
) -> Result<()> {
    let head = [
        name.to_string(),
        model.kind.as_str().to_string(),
        model.order.to_string(),
    ];
    let blank = String::new;
    if !args.summary_only {
        for p in &report.points {
            let mut rec = head.to_vec();
            rec.extend([
                "point".to_string(),
                "1".to_string(),
                p.volume.to_string(),
                p.perimeter.to_string(),
                p.estimate.to_string(),
                p.error_ul.to_string(),
                p.extrapolated.to_string(),
                blank(),
                blank(),
                blank(),
            ]);
            out.write_record(&rec)?;
        }
    }
    let aggregate = |scope: String, count: usize, mae: f64, max: f64, rss: String| {
        let mut rec = head.to_vec();
        rec.extend([
            scope,
            count.to_string(),
            blank(),
            blank(),
            blank(),
            blank(),
            blank(),
            mae.to_string(),
            max.to_string(),
            rss,
        ]);
        rec
    };
    out.write_record(aggregate(
        "all".into(),
        report.points.len(),
        report.mean_abs_error,
        report.max_abs_error,
        rss.to_string(),
    ))?;
    if args.by_region {
        for (region, stats) in &report.per_region {
            out.write_record(aggregate(
                format!("region_{region}"),
                stats.count,
                stats.mean_abs_error,
                stats.max_abs_error,
                blank(),
            ))?;
        }
    }
    Ok(())
}
