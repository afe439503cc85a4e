//! The JSON run configuration. Command-line flags override file values.

use std::path::{Path, PathBuf};

use fluidlevel::calibrate::check_monotone;
use fluidlevel::{CalibrationModel, Direction, SceneConfig, StabilizerConfig, VisionParams};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub vision: VisionParams,
    pub stabilizer: StabilizerConfig,
    /// Calibration model JSON.
    pub model: Option<PathBuf>,
    /// `dir:<path>`, `file:<path>` or an MJPEG URL.
    pub source: Option<String>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::config(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::config(format!("config {}: {e}", p.display())))?
            }
        };
        if let Some(m) = &cfg.model {
            if !m.is_file() {
                return Err(CliError::config(format!(
                    "model {} does not exist",
                    m.display()
                )));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scene
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        self.vision
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        self.stabilizer
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        Ok(())
    }
}

pub fn load_model(path: &Path) -> Result<CalibrationModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read model {}: {e}", path.display())))?;
    CalibrationModel::from_json(&text)
        .map_err(|e| CliError::config(format!("model {}: {e}", path.display())))
}

/// Loads a model and checks it can turn perimeters into volumes.
pub fn load_invertible_model(path: &Path) -> Result<CalibrationModel> {
    let model = load_model(path)?;
    if model.direction == Direction::VolumeToPerimeter && check_monotone(&model).is_err() {
        return Err(CliError::config(format!(
            "model {} is not monotone, cannot be inverted",
            path.display()
        )));
    }
    Ok(model)
}
