//! Frame → ellipse measurement.
//!
//! `binarize` → `extract_contours` → `central_contour` → `fit_ellipse`.

mod contour;
mod ellipse;
mod frame;
mod threshold;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use contour::{central_contour, extract_contours, Contour};
pub use ellipse::{ellipse_perimeter, fit_ellipse, fit_ellipse_points, EllipseFit};
pub use frame::{Frame, Timestamp};
pub use threshold::{binarize, otsu_threshold, BinaryMask};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VisionError {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("all pixels have the same intensity")]
    DegenerateImage,
    #[error("no contour passed the area filter")]
    NoContour,
    #[error("need at least 5 distinct points, got {0}")]
    InsufficientPoints(usize),
    #[error("degenerate conic: {0}")]
    DegenerateConic(&'static str),
    #[error("invalid vision parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Foreground is every pixel at or above this level.
    Fixed(u8),
    /// Level chosen by maximizing between-class variance.
    Automatic,
}

fn default_min_area() -> f64 {
    30.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisionParams {
    #[serde(default = "default_threshold")]
    pub threshold: ThresholdMode,
    /// Contours enclosing less than this many px² are ignored.
    #[serde(default = "default_min_area")]
    pub min_contour_area: f64,
    /// Bias towards larger blobs when picking the central contour: each
    /// candidate is scored by centroid distance minus `center_weight` times
    /// its equivalent-circle radius. Zero selects purely by distance.
    #[serde(default)]
    pub center_weight: f64,
}

fn default_threshold() -> ThresholdMode {
    ThresholdMode::Automatic
}

impl Default for VisionParams {
    fn default() -> Self {
        Self {
            threshold: ThresholdMode::Automatic,
            min_contour_area: default_min_area(),
            center_weight: 0.0,
        }
    }
}

impl VisionParams {
    pub fn validate(&self) -> Result<(), VisionError> {
        if !(self.min_contour_area >= 5.0) {
            return Err(VisionError::InvalidParams(format!(
                "min_contour_area must be >= 5, got {}",
                self.min_contour_area
            )));
        }
        if !(self.center_weight >= 0.0 && self.center_weight.is_finite()) {
            return Err(VisionError::InvalidParams(
                "center_weight must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Full pipeline on one frame.
pub fn measure_frame(frame: &Frame, params: &VisionParams) -> Result<EllipseFit, VisionError> {
    let mask = match binarize(frame, params) {
        Ok(m) => m,
        // A uniform frame has nothing to find.
        Err(VisionError::DegenerateImage) => return Err(VisionError::NoContour),
        Err(e) => return Err(e),
    };
    let contours = extract_contours(&mask);
    let best = central_contour(&contours, (frame.width(), frame.height()), params)?;
    fit_ellipse(best)
}
