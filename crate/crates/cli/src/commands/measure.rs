use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use clap::Args;
use fluidlevel::calibrate::estimate_volume;
use fluidlevel::ingest::{DirectoryOptions, FrameSource, IngestError, SourceSpec};
use fluidlevel::simulate::{region_of, Region};
use fluidlevel::vision::measure_frame;
use fluidlevel::{CalibrationModel, Stabilizer};
use serde::Serialize;

use crate::commands::open_output;
use crate::config::{load_invertible_model, RunConfig};
use crate::error::{CliError, Result};

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// Frame source: dir:<path>[/<glob>], file:<path> or an http(s) MJPEG URL.
    #[arg(long)]
    pub source: Option<String>,
    /// Calibration model JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// NDJSON output path; `-` or absent writes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also emit every per-frame reading, with `stabilized: false`.
    #[arg(long)]
    pub verbose: bool,
    /// Stabilizer window length, frames.
    #[arg(long)]
    pub window: Option<usize>,
    /// Stabilizer threshold: a fraction of the window mean, or px with --absolute.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Treat --sigma as an absolute deviation in px.
    #[arg(long)]
    pub absolute: bool,
    /// Seconds between frames of a directory source.
    #[arg(long, default_value_t = 0.1)]
    pub frame_interval: f64,
    /// Run several wells concurrently, each as ID=SOURCE (comma separated or repeated).
    #[arg(long, value_delimiter = ',', num_args = 1.., conflicts_with = "source")]
    pub wells: Vec<String>,
}

/// One NDJSON output line.
#[derive(Debug, Serialize)]
pub struct VolumeReading<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub well: Option<&'a str>,
    pub timestamp: Option<f64>,
    pub perimeter: f64,
    pub volume: f64,
    pub region: Region,
    pub stabilized: bool,
    pub sigma: Option<f64>,
    pub extrapolated: bool,
}

/// Writes whole lines under a lock so concurrent wells never interleave mid-line.
pub struct LineSink<W: Write> {
    inner: Mutex<W>,
}

impl<W: Write> LineSink<W> {
    pub fn new(inner: W) -> Self {
        Self {
            inner: Mutex::new(inner),
        }
    }

    pub fn emit(&self, reading: &VolumeReading<'_>) -> Result<()> {
        let mut line = serde_json::to_string(reading).map_err(|e| CliError::io(e.to_string()))?;
        line.push('\n');
        let mut w = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        w.write_all(line.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(e.to_string()))
    }
}

struct Well<'a> {
    id: Option<&'a str>,
    spec: SourceSpec,
}

fn parse_wells(raw: &[String]) -> Result<Vec<(String, String)>> {
    raw.iter()
        .map(|w| {
            w.split_once('=')
                .filter(|(id, spec)| !id.is_empty() && !spec.is_empty())
                .map(|(id, spec)| (id.to_string(), spec.to_string()))
                .ok_or_else(|| CliError::config(format!("--wells entry {w:?} is not ID=SOURCE")))
        })
        .collect()
}

fn source_error(e: IngestError) -> CliError {
    match e {
        IngestError::BadSpec(_) => CliError::config(e.to_string()),
        _ => CliError::no_data(e.to_string()),
    }
}

pub fn run(mut cfg: RunConfig, args: MeasureArgs) -> Result<()> {
    if let Some(n) = args.window {
        cfg.stabilizer.window = n;
    }
    if let Some(s) = args.sigma {
        cfg.stabilizer.sigma_threshold = s;
        cfg.stabilizer.relative = !args.absolute;
    } else if args.absolute {
        return Err(CliError::config("--absolute needs --sigma"));
    }
    cfg.validate()?;
    let model_path = args
        .model
        .or(cfg.model.clone())
        .ok_or_else(|| CliError::config("measure needs --model or a model in the config"))?;
    let model = load_invertible_model(&model_path)?;

    let ids = parse_wells(&args.wells)?;
    let wells: Vec<Well<'_>> = if ids.is_empty() {
        let spec =
            args.source.clone().or(cfg.source.clone()).ok_or_else(|| {
                CliError::config("measure needs --source or a source in the config")
            })?;
        vec![Well {
            id: None,
            spec: SourceSpec::parse(&spec).map_err(source_error)?,
        }]
    } else {
        ids.iter()
            .map(|(id, spec)| {
                Ok(Well {
                    id: Some(id.as_str()),
                    spec: SourceSpec::parse(spec).map_err(source_error)?,
                })
            })
            .collect::<Result<_>>()?
    };

    let sink = LineSink::new(open_output(args.out.or(cfg.output.clone()).as_deref())?);
    let opts = DirectoryOptions {
        frame_interval: args.frame_interval,
        strict: false,
    };
    let pipeline = Pipeline {
        cfg: &cfg,
        model: &model,
        sink: &sink,
        verbose: args.verbose,
    };
    let results: Vec<Result<()>> = std::thread::scope(|s| {
        let handles: Vec<_> = wells
            .iter()
            .map(|w| {
                let pipeline = &pipeline;
                s.spawn(move || {
                    let source = w.spec.open(opts).map_err(source_error)?;
                    pipeline.run(w.id, source)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(CliError::io("well worker panicked")))
            })
            .collect()
    });
    let mut first = None;
    for (w, r) in wells.iter().zip(results) {
        if let Err(e) = r {
            log::error!("{}: {e}", w.id.unwrap_or("source"));
            first.get_or_insert(e);
        }
    }
    first.map_or(Ok(()), Err)
}

struct Pipeline<'a, W: Write> {
    cfg: &'a RunConfig,
    model: &'a CalibrationModel,
    sink: &'a LineSink<W>,
    verbose: bool,
}

impl<W: Write + Send> Pipeline<'_, W> {
    fn reading<'w>(
        &self,
        well: Option<&'w str>,
        timestamp: Option<f64>,
        perimeter: f64,
        stabilized: bool,
        sigma: Option<f64>,
    ) -> Result<VolumeReading<'w>> {
        let est = estimate_volume(self.model, perimeter)?;
        Ok(VolumeReading {
            well,
            timestamp,
            perimeter,
            volume: est.value,
            region: region_of(est.value.max(0.0), &self.cfg.scene.meniscus),
            stabilized,
            sigma,
            extrapolated: est.extrapolated,
        })
    }

    fn run(&self, well: Option<&str>, source: FrameSource) -> Result<()> {
        let mut stab =
            Stabilizer::new(self.cfg.stabilizer).map_err(|e| CliError::config(e.to_string()))?;
        let tag = well.unwrap_or("source");
        let mut measured = 0usize;
        for (i, item) in source.enumerate() {
            let frame = match item {
                Ok(f) => f,
                Err(e) if e.is_fatal() => {
                    if measured == 0 {
                        return Err(CliError::no_data(format!("{tag}: {e}")));
                    }
                    log::warn!("{tag}: source stopped: {e}");
                    break;
                }
                Err(e) => {
                    log::warn!("{tag}: frame {i}: {e}");
                    continue;
                }
            };
            let fit = match measure_frame(&frame, &self.cfg.vision) {
                Ok(f) => f,
                Err(e) => {
                    log::debug!("{tag}: frame {i}: {e}");
                    continue;
                }
            };
            measured += 1;
            let ts = frame.timestamp.map(|t| t.as_secs_f64());
            let stable = stab
                .push(fit.perimeter, frame.timestamp)
                .map_err(|e| CliError::numeric(e.to_string()))?;
            if self.verbose {
                self.sink.emit(&self.reading(
                    well,
                    ts,
                    fit.perimeter,
                    false,
                    stab.last_sigma(),
                )?)?;
            }
            if let Some(r) = stable {
                let ts = r.window_end.map(|t| t.as_secs_f64()).or(ts);
                self.sink
                    .emit(&self.reading(well, ts, r.value, true, Some(r.sigma))?)?;
            }
        }
        if measured == 0 {
            return Err(CliError::no_data(format!(
                "{tag}: no frame could be measured"
            )));
        }
        Ok(())
    }
}
