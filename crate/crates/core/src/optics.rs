//! Geometric optics of a light source viewed through a fluid column.
//!
//! A point source sits at height `h` above the measurement plane. Between
//! them is a cylindrical well whose fluid bottom is `h1` above the plane and
//! whose fluid depth is `L`. A ray leaving the source at angle `θ1` from the
//! vertical refracts to `θ2` inside the fluid and back to `θ1` below it. The
//! lateral offset where it reaches the plane, divided by `tan θ1`, is the
//! apparent distance of the source.
//!
//! All lengths are millimetres, all angles radians.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulate::CameraModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpticsError {
    #[error("total internal reflection: n_in/n_out * sin(theta) = {0:.6} > 1")]
    TotalInternalReflection(f64),
    #[error("angle {0} rad outside the open interval (0, pi/2)")]
    InvalidAngle(f64),
    #[error("{what} = {value} outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("apparent distance {distance} mm does not exceed focal length {focal} mm")]
    DegenerateProjection { distance: f64, focal: f64 },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
}

pub type Result<T> = std::result::Result<T, OpticsError>;

/// Physical dimensions of one well and its light source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WellGeometry {
    /// LED to measurement plane.
    pub source_height_h: f64,
    /// Fluid bottom to measurement plane.
    pub bottom_offset_h1: f64,
    pub well_radius: f64,
    pub well_depth: f64,
    /// Millilitres.
    pub capacity: f64,
}

impl Default for WellGeometry {
    /// A 24-well plate well under a source 60 mm above the sensor plane.
    fn default() -> Self {
        Self {
            source_height_h: 60.0,
            bottom_offset_h1: 5.0,
            well_radius: 7.8,
            well_depth: 17.8,
            capacity: 3.4,
        }
    }
}

impl WellGeometry {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("source_height_h", self.source_height_h),
            ("bottom_offset_h1", self.bottom_offset_h1),
            ("well_radius", self.well_radius),
            ("well_depth", self.well_depth),
            ("capacity", self.capacity),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(OpticsError::InvalidGeometry(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if self.source_height_h <= self.bottom_offset_h1 {
            return Err(OpticsError::InvalidGeometry(
                "source_height_h must exceed bottom_offset_h1".into(),
            ));
        }
        if self.well_depth * self.cross_section() < self.capacity * 1000.0 {
            return Err(OpticsError::InvalidGeometry(format!(
                "well volume {:.1} mm^3 below capacity {} ml",
                self.well_depth * self.cross_section(),
                self.capacity
            )));
        }
        Ok(())
    }

    /// Cross-sectional area in mm².
    pub fn cross_section(&self) -> f64 {
        PI * self.well_radius * self.well_radius
    }
}

/// Refractive indices above/below the fluid surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumPair {
    pub n_ambient: f64,
    pub n_fluid: f64,
}

impl Default for MediumPair {
    /// Air over water.
    fn default() -> Self {
        Self {
            n_ambient: 1.0,
            n_fluid: 1.333,
        }
    }
}

impl MediumPair {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_ambient > 0.0 && self.n_fluid > 0.0) {
            return Err(OpticsError::InvalidGeometry(
                "refractive indices must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// The three constants of the affine level→distance relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferConstants {
    /// `h - h1`
    pub c0: f64,
    /// `tan θ1`
    pub c1: f64,
    /// `tan θ2`
    pub c2: f64,
}

impl TransferConstants {
    pub fn new(geom: &WellGeometry, media: &MediumPair, theta1: f64) -> Result<Self> {
        check_angle(theta1)?;
        let theta2 = snell_refract(theta1, media.n_ambient, media.n_fluid)?;
        Ok(Self {
            c0: geom.source_height_h - geom.bottom_offset_h1,
            c1: theta1.tan(),
            c2: theta2.tan(),
        })
    }
}

/// Lateral offsets of one traced ray and the resulting apparent distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayPath {
    /// At the fluid surface.
    pub x0: f64,
    /// At the fluid bottom.
    pub x1: f64,
    /// At the measurement plane.
    pub xf: f64,
    pub apparent_distance: f64,
}

fn check_angle(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < FRAC_PI_2 {
        Ok(())
    } else {
        Err(OpticsError::InvalidAngle(theta))
    }
}

/// Snell's law: `n_in sin θ_in = n_out sin θ_out`.
pub fn snell_refract(theta_in: f64, n_in: f64, n_out: f64) -> Result<f64> {
    if !(0.0..FRAC_PI_2).contains(&theta_in) {
        return Err(OpticsError::InvalidAngle(theta_in));
    }
    let s = n_in / n_out * theta_in.sin();
    if s > 1.0 {
        return Err(OpticsError::TotalInternalReflection(s));
    }
    Ok(s.asin())
}

/// Fluid depth for a volume in a right circular cylinder.
pub fn volume_to_level(volume_ml: f64, geom: &WellGeometry) -> Result<f64> {
    if !(0.0..=geom.capacity).contains(&volume_ml) {
        return Err(OpticsError::OutOfRange {
            what: "volume",
            value: volume_ml,
            min: 0.0,
            max: geom.capacity,
        });
    }
    Ok(1000.0 * volume_ml / geom.cross_section())
}

pub fn level_to_volume(level_mm: f64, geom: &WellGeometry) -> Result<f64> {
    if !(0.0..=geom.well_depth).contains(&level_mm) {
        return Err(OpticsError::OutOfRange {
            what: "level",
            value: level_mm,
            min: 0.0,
            max: geom.well_depth,
        });
    }
    Ok(level_mm * geom.cross_section() / 1000.0)
}

fn check_level(level: f64, geom: &WellGeometry) -> Result<()> {
    if (0.0..=geom.well_depth).contains(&level) {
        Ok(())
    } else {
        Err(OpticsError::OutOfRange {
            what: "level",
            value: level,
            min: 0.0,
            max: geom.well_depth,
        })
    }
}

/// Traces a single ray leaving the source at `theta1` and reports where the
/// source appears to be when seen along that ray from below.
pub fn apparent_distance_exact(
    geom: &WellGeometry,
    media: &MediumPair,
    level: f64,
    theta1: f64,
) -> Result<RayPath> {
    check_level(level, geom)?;
    let TransferConstants { c0, c1, c2 } = TransferConstants::new(geom, media, theta1)?;
    let h1 = geom.bottom_offset_h1;
    let x0 = (c0 - level) * c1;
    let x1 = x0 + level * c2;
    let xf = x1 + h1 * c1;
    debug_assert!((xf - (level * (c2 - c1) + h1 * c1 + c0 * c1)).abs() <= 1e-9 * xf.abs().max(1.0));
    Ok(RayPath {
        x0,
        x1,
        xf,
        apparent_distance: xf / c1,
    })
}

/// Small-angle limit of [`apparent_distance_exact`]: `I = h - L (1 - n1/n2)`.
pub fn apparent_distance_paraxial(
    geom: &WellGeometry,
    media: &MediumPair,
    level: f64,
) -> Result<f64> {
    check_level(level, geom)?;
    Ok(geom.source_height_h - level * (1.0 - media.n_ambient / media.n_fluid))
}

/// Radius in pixels of the image of a disk source of radius `source_radius`
/// placed at `apparent_distance` in front of a pinhole camera.
pub fn expected_spot_radius(
    apparent_distance: f64,
    camera: &CameraModel,
    source_radius: f64,
) -> Result<f64> {
    if apparent_distance <= camera.focal_length {
        return Err(OpticsError::DegenerateProjection {
            distance: apparent_distance,
            focal: camera.focal_length,
        });
    }
    if !(source_radius > 0.0) {
        return Err(OpticsError::InvalidGeometry(format!(
            "source radius must be > 0, got {source_radius}"
        )));
    }
    Ok(source_radius * camera.focal_length / apparent_distance / camera.pixel_pitch)
}
