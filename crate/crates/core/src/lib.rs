//! Fluid level measurement from the apparent size of a light source seen
//! through a well.
//!
//! - [`optics`]: refraction model relating fluid depth to apparent source distance.
//! - [`simulate`]: piecewise response model and synthetic frame renderer.
//! - [`vision`]: threshold, contour, ellipse fit, perimeter.
//! - [`stabilize`]: rolling-window acceptance filter.
//! - [`calibrate`]: perimeter ↔ volume polynomial calibration and error reports.
//! - [`ingest`]: PGM/PNG/JPEG files, directories and MJPEG streams.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod ingest;
pub mod optics;
pub mod simulate;
pub mod stabilize;
pub mod vision;

pub use calibrate::{CalibrationModel, CalibrationPoint, Direction, ModelKind};
pub use optics::{MediumPair, WellGeometry};
pub use simulate::{CameraModel, MeniscusProfile, Region, SceneConfig};
pub use stabilize::{Stabilizer, StabilizerConfig};
pub use vision::{EllipseFit, Frame, VisionParams};
