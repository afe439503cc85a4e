//! (volume, perimeter) tables: plain point files and simulator manifests.

use std::path::{Path, PathBuf};

use fluidlevel::ingest::read_frame_file;
use fluidlevel::vision::measure_frame;
use fluidlevel::VisionParams;
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Deserialize)]
struct PointRow {
    volume_ml: f64,
    perimeter_px: f64,
}

#[derive(Deserialize)]
struct ManifestRow {
    volume_ml: f64,
    frame_path: PathBuf,
    expected_perimeter_px: f64,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub rows: Vec<(f64, f64)>,
    /// Whether the input was a simulator manifest.
    pub manifest: bool,
}

/// How manifest perimeters are obtained.
#[derive(Debug, Clone, Copy)]
pub enum ManifestPerimeter<'a> {
    /// Run the vision pipeline on each listed frame.
    Measured(&'a VisionParams),
    /// Use the simulator's noise-free value.
    Expected,
}

pub fn load_table(path: &Path, mode: ManifestPerimeter<'_>) -> Result<Table> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let is_manifest = headers.iter().any(|h| h == "frame_path");
    let mut rows = Vec::new();
    if is_manifest {
        let base = path.parent().unwrap_or(Path::new("."));
        for rec in reader.deserialize::<ManifestRow>() {
            let row = rec?;
            match mode {
                ManifestPerimeter::Expected => {
                    rows.push((row.volume_ml, row.expected_perimeter_px))
                }
                ManifestPerimeter::Measured(params) => {
                    let frame_path = base.join(&row.frame_path);
                    let frame =
                        read_frame_file(&frame_path).map_err(|e| CliError::io(e.to_string()))?;
                    match measure_frame(&frame, params) {
                        Ok(fit) => rows.push((row.volume_ml, fit.perimeter)),
                        Err(e) => log::warn!("{}: {e}; row skipped", frame_path.display()),
                    }
                }
            }
        }
    } else {
        for rec in reader.deserialize::<PointRow>() {
            let row = rec?;
            rows.push((row.volume_ml, row.perimeter_px));
        }
    }
    if let Some(bad) = rows
        .iter()
        .find(|(v, p)| !(v.is_finite() && *v >= 0.0 && p.is_finite() && *p > 0.0))
    {
        return Err(CliError::config(format!(
            "{}: invalid row volume {} perimeter {}",
            path.display(),
            bad.0,
            bad.1
        )));
    }
    Ok(Table {
        rows,
        manifest: is_manifest,
    })
}
