use std::path::PathBuf;

use clap::Args;
use fluidlevel::ingest::{DirectoryOptions, IngestError, SourceSpec};
use fluidlevel::vision::{measure_frame, ThresholdMode};

use crate::commands::{open_output, parse_threshold};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const CSV_HEADER: [&str; 7] = ["timestamp", "cx", "cy", "a", "b", "rotation", "perimeter"];

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Frame source: dir:<path>[/<glob>], file:<path> or an http(s) MJPEG URL.
    #[arg(long)]
    pub source: Option<String>,
    /// CSV output path; `-` or absent writes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `auto` or a fixed level 0-255.
    #[arg(long, value_parser = parse_threshold)]
    pub threshold: Option<ThresholdMode>,
    /// Smallest contour area considered, px².
    #[arg(long)]
    pub min_area: Option<f64>,
    /// Seconds between frames of a directory source.
    #[arg(long, default_value_t = 0.1)]
    pub frame_interval: f64,
    /// Abort on the first unreadable file instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

pub fn source_error(e: IngestError) -> CliError {
    match e {
        IngestError::BadSpec(_) => CliError::config(e.to_string()),
        IngestError::NoMatches { .. } => CliError::no_data(e.to_string()),
        _ => CliError::io(e.to_string()),
    }
}

pub fn run(mut cfg: RunConfig, args: AnalyzeArgs) -> Result<()> {
    if let Some(t) = args.threshold {
        cfg.vision.threshold = t;
    }
    if let Some(a) = args.min_area {
        cfg.vision.min_contour_area = a;
    }
    cfg.validate()?;
    let spec = args
        .source
        .or(cfg.source)
        .ok_or_else(|| CliError::config("analyze needs --source or a source in the config"))?;
    let spec = SourceSpec::parse(&spec).map_err(source_error)?;
    let opts = DirectoryOptions {
        frame_interval: args.frame_interval,
        strict: args.strict,
    };
    let source = spec.open(opts).map_err(source_error)?;

    let mut out = csv::Writer::from_writer(open_output(args.out.or(cfg.output).as_deref())?);
    out.write_record(CSV_HEADER)?;
    let mut measured = 0usize;
    let mut failure = None;
    for (i, item) in source.enumerate() {
        let frame = match item {
            Ok(f) => f,
            Err(e) if e.is_fatal() => {
                log::error!("source stopped: {e}");
                failure = Some(e);
                break;
            }
            Err(e) => {
                log::warn!("frame {i}: {e}");
                continue;
            }
        };
        match measure_frame(&frame, &cfg.vision) {
            Ok(fit) => {
                let ts = frame
                    .timestamp
                    .map(|t| t.as_secs_f64().to_string())
                    .unwrap_or_default();
                out.write_record([
                    ts,
                    fit.center.0.to_string(),
                    fit.center.1.to_string(),
                    fit.a.to_string(),
                    fit.b.to_string(),
                    fit.rotation.to_string(),
                    fit.perimeter.to_string(),
                ])?;
                measured += 1;
            }
            Err(e) => log::warn!("frame {i}: {e}"),
        }
    }
    out.flush().map_err(|e| CliError::io(e.to_string()))?;
    if measured == 0 {
        return Err(match failure {
            Some(e) => source_error(e),
            None => CliError::no_data("no frame could be measured"),
        });
    }
    log::info!("measured {measured} frames");
    Ok(())
}
