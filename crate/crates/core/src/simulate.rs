//! Forward model of the spot perimeter and a synthetic frame renderer.
//!
//! The response curve is piecewise: a developing meniscus (A) where the spot
//! grows slower than the optics predict, a stable linear stretch (B), a
//! meniscus inversion (C) where the bulging surface adds magnification, and
//! overflow (D) where the surface is pinned and the spot stops changing.

use std::f64::consts::PI;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::write_pgm;
use crate::optics::{self, MediumPair, OpticsError, WellGeometry};
use crate::vision::{ellipse_perimeter, Frame};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulateError {
    #[error("invalid scene: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Optics(#[from] OpticsError),
}

pub type Result<T> = std::result::Result<T, SimulateError>;

/// Pinhole camera looking straight up at the source through the well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    /// mm
    pub focal_length: f64,
    /// mm per pixel
    pub pixel_pitch: f64,
    pub width: u32,
    pub height: u32,
    pub principal_point: [f64; 2],
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            focal_length: 3.0,
            pixel_pitch: 0.0014,
            width: 640,
            height: 480,
            principal_point: [319.5, 239.5],
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.focal_length > 0.0 && self.pixel_pitch > 0.0) {
            return Err(SimulateError::InvalidConfig(
                "focal_length and pixel_pitch must be > 0".into(),
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err(SimulateError::InvalidConfig("camera has zero size".into()));
        }
        let [px, py] = self.principal_point;
        if !(0.0..self.width as f64).contains(&px) || !(0.0..self.height as f64).contains(&py) {
            return Err(SimulateError::InvalidConfig(format!(
                "principal point ({px}, {py}) outside {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Volume thresholds (ml) of the four response regions and the slope
/// modifiers applied in A and C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeniscusProfile {
    pub v_film: f64,
    pub v_invert: f64,
    pub v_overflow: f64,
    /// Fraction of the region-B slope seen while the film develops.
    pub developing_slope_factor: f64,
    /// Spot magnification reached at overflow relative to the linear trend.
    pub inversion_gain: f64,
}

impl Default for MeniscusProfile {
    fn default() -> Self {
        Self {
            v_film: 0.5,
            v_invert: 2.2,
            v_overflow: 2.6,
            developing_slope_factor: 0.75,
            inversion_gain: 1.015,
        }
    }
}

/// Overflow may sit a little above nominal capacity (surface tension).
const OVERFLOW_MARGIN_ML: f64 = 0.5;

impl MeniscusProfile {
    pub fn validate(&self, geom: &WellGeometry) -> Result<()> {
        if !(0.0 < self.v_film && self.v_film < self.v_invert && self.v_invert < self.v_overflow) {
            return Err(SimulateError::InvalidConfig(format!(
                "need 0 < v_film < v_invert < v_overflow, got {} / {} / {}",
                self.v_film, self.v_invert, self.v_overflow
            )));
        }
        if self.v_overflow > geom.capacity + OVERFLOW_MARGIN_ML {
            return Err(SimulateError::InvalidConfig(format!(
                "v_overflow {} exceeds capacity {} + margin",
                self.v_overflow, geom.capacity
            )));
        }
        if !(self.developing_slope_factor > 0.0 && self.developing_slope_factor < 1.0) {
            return Err(SimulateError::InvalidConfig(
                "developing_slope_factor must be in (0, 1)".into(),
            ));
        }
        if !(self.inversion_gain > 1.0) {
            return Err(SimulateError::InvalidConfig(
                "inversion_gain must be > 1".into(),
            ));
        }
        Ok(())
    }

    /// Volume span `[lo, hi)` of a region; D is unbounded above.
    pub fn span(&self, region: Region) -> (f64, f64) {
        match region {
            Region::A => (0.0, self.v_film),
            Region::B => (self.v_film, self.v_invert),
            Region::C => (self.v_invert, self.v_overflow),
            Region::D => (self.v_overflow, f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    /// Meniscus still forming.
    A,
    /// Stable meniscus, linear response.
    B,
    /// Meniscus inversion.
    C,
    /// Overflow.
    D,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::A, Region::B, Region::C, Region::D];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::A => "A",
            Region::B => "B",
            Region::C => "C",
            Region::D => "D",
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn region_of(v: f64, profile: &MeniscusProfile) -> Region {
    if v < profile.v_film {
        Region::A
    } else if v < profile.v_invert {
        Region::B
    } else if v < profile.v_overflow {
        Region::C
    } else {
        Region::D
    }
}

fn default_source_radius() -> f64 {
    2.5
}
fn default_blob_radius() -> f64 {
    1.5
}
fn default_one() -> f64 {
    1.0
}
fn default_spot_level() -> u8 {
    230
}
fn default_background_level() -> u8 {
    20
}

/// Everything needed to render a frame deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default)]
    pub geometry: WellGeometry,
    #[serde(default)]
    pub media: MediumPair,
    #[serde(default)]
    pub camera: CameraModel,
    /// LED radius, mm.
    #[serde(default = "default_source_radius")]
    pub source_radius: f64,
    #[serde(default)]
    pub meniscus: MeniscusProfile,
    /// Gaussian noise standard deviation on the 0-255 scale.
    #[serde(default)]
    pub noise_sigma: f64,
    /// Fraction of the spot area covered by dark occluding blobs.
    #[serde(default)]
    pub occlusion_fraction: f64,
    /// Radius of each occluding blob, px.
    #[serde(default = "default_blob_radius")]
    pub occlusion_blob_radius: f64,
    #[serde(default)]
    pub seed: u64,
    /// A moistened well forms a film immediately; a dry one beads into
    /// droplets until `v_film` is reached.
    #[serde(default)]
    pub prewetted: bool,
    /// Minor/major axis ratio of the rendered spot; 1 is a circle.
    #[serde(default = "default_one")]
    pub astigmatism_ratio: f64,
    /// Major-axis direction in radians when `astigmatism_ratio < 1`.
    #[serde(default)]
    pub astigmatism_angle: f64,
    #[serde(default = "default_spot_level")]
    pub spot_level: u8,
    #[serde(default = "default_background_level")]
    pub background_level: u8,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            geometry: WellGeometry::default(),
            media: MediumPair::default(),
            camera: CameraModel::default(),
            source_radius: default_source_radius(),
            meniscus: MeniscusProfile::default(),
            noise_sigma: 0.0,
            occlusion_fraction: 0.0,
            occlusion_blob_radius: default_blob_radius(),
            seed: 0,
            prewetted: false,
            astigmatism_ratio: 1.0,
            astigmatism_angle: 0.0,
            spot_level: default_spot_level(),
            background_level: default_background_level(),
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.media.validate()?;
        self.camera.validate()?;
        self.meniscus.validate(&self.geometry)?;
        if !(self.source_radius > 0.0) {
            return Err(SimulateError::InvalidConfig(
                "source_radius must be > 0".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(SimulateError::InvalidConfig(
                "noise_sigma must be >= 0".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.occlusion_fraction) {
            return Err(SimulateError::InvalidConfig(
                "occlusion_fraction must be in [0, 1)".into(),
            ));
        }
        if !(self.occlusion_blob_radius > 0.0 && self.occlusion_blob_radius.is_finite()) {
            return Err(SimulateError::InvalidConfig(
                "occlusion_blob_radius must be > 0".into(),
            ));
        }
        if !(self.astigmatism_ratio > 0.0 && self.astigmatism_ratio <= 1.0) {
            return Err(SimulateError::InvalidConfig(
                "astigmatism_ratio must be in (0, 1]".into(),
            ));
        }
        if self.spot_level <= self.background_level {
            return Err(SimulateError::InvalidConfig(
                "spot_level must be brighter than background_level".into(),
            ));
        }
        Ok(())
    }
}

/// Precomputed breakpoints of the piecewise response curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseModel {
    profile: MeniscusProfile,
    /// Perimeter of the dry-well spot.
    pub dry_perimeter: f64,
    /// d(perimeter)/d(volume) of the paraxial model at the middle of region B.
    pub slope_b: f64,
}

impl ResponseModel {
    pub fn new(scene: &SceneConfig) -> Result<Self> {
        scene.validate()?;
        let profile = scene.meniscus;
        let dry_perimeter = paraxial_perimeter(scene, 0.0)?;
        let v_mid = 0.5 * (profile.v_film + profile.v_invert);
        let slope_b = paraxial_perimeter_slope(scene, v_mid)?;
        Ok(Self {
            profile,
            dry_perimeter,
            slope_b,
        })
    }

    pub fn perimeter(&self, v: f64) -> f64 {
        let p = &self.profile;
        let v = v.max(0.0).min(p.v_overflow);
        let at_film = self.dry_perimeter + p.developing_slope_factor * self.slope_b * p.v_film;
        if v < p.v_film {
            return self.dry_perimeter + p.developing_slope_factor * self.slope_b * v;
        }
        let linear = at_film + self.slope_b * (v - p.v_film);
        if v < p.v_invert {
            return linear;
        }
        let t = (v - p.v_invert) / (p.v_overflow - p.v_invert);
        linear * (1.0 + (p.inversion_gain - 1.0) * t)
    }
}

/// `2π r` of the spot for the paraxial apparent distance at volume `v`.
pub fn paraxial_perimeter(scene: &SceneConfig, v: f64) -> Result<f64> {
    let level = optics::volume_to_level(v, &scene.geometry)?;
    let dist = optics::apparent_distance_paraxial(&scene.geometry, &scene.media, level)?;
    Ok(2.0 * PI * optics::expected_spot_radius(dist, &scene.camera, scene.source_radius)?)
}

/// Closed-form derivative of [`paraxial_perimeter`] with respect to volume.
fn paraxial_perimeter_slope(scene: &SceneConfig, v: f64) -> Result<f64> {
    let level = optics::volume_to_level(v, &scene.geometry)?;
    let dist = optics::apparent_distance_paraxial(&scene.geometry, &scene.media, level)?;
    let cam = &scene.camera;
    let k = 2.0 * PI * scene.source_radius * cam.focal_length / cam.pixel_pitch;
    let d_level_d_v = 1000.0 / scene.geometry.cross_section();
    let d_dist_d_level = -(1.0 - scene.media.n_ambient / scene.media.n_fluid);
    Ok(-k / (dist * dist) * d_dist_d_level * d_level_d_v)
}

/// Noise-free spot perimeter in pixels at volume `v` (ml).
pub fn effective_perimeter(scene: &SceneConfig, v: f64) -> Result<f64> {
    Ok(ResponseModel::new(scene)?.perimeter(v))
}

/// Spot radius from a finite-angle trace of the marginal ray: finds the ray
/// from the rim of the source that reaches the pinhole and projects its
/// arrival angle onto the sensor. Returns `(radius_px, rim_angle_rad)`.
pub fn traced_spot_radius(scene: &SceneConfig, level: f64) -> Result<(f64, f64)> {
    let geom = &scene.geometry;
    let media = &scene.media;
    let target = scene.source_radius;
    let lateral = |theta: f64| -> Result<f64> {
        Ok(optics::apparent_distance_exact(geom, media, level, theta)?.xf)
    };
    let mut lo = 1e-12;
    let mut hi = (target / (geom.source_height_h - level)).atan().max(1e-9);
    // xf grows with theta; widen until the rim is bracketed.
    while lateral(hi)? < target {
        lo = hi;
        hi = (hi * 2.0).min(std::f64::consts::FRAC_PI_2 - 1e-9);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lateral(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let theta = 0.5 * (lo + hi);
    let cam = &scene.camera;
    Ok((cam.focal_length * theta.tan() / cam.pixel_pitch, theta))
}

fn frame_rng(scene: &SceneConfig, v: f64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    rng.set_stream(v.to_bits());
    rng
}

/// Renders one synthetic camera frame for volume `v`.
pub fn render_frame(scene: &SceneConfig, v: f64) -> Result<Frame> {
    let model = ResponseModel::new(scene)?;
    let cam = &scene.camera;
    let mut rng = frame_rng(scene, v);
    let mut frame = Frame::filled(cam.width, cam.height, scene.background_level)
        .map_err(|e| SimulateError::InvalidConfig(e.to_string()))?;
    let [cx, cy] = cam.principal_point;

    let perimeter = model.perimeter(v);
    let q = scene.astigmatism_ratio;
    let a = perimeter / ellipse_perimeter(1.0, q);
    let b = q * a;

    if v < scene.meniscus.v_film && !scene.prewetted {
        // Beaded droplets each throw a tiny glint; no coherent spot forms.
        let count = rng.random_range(6..=12);
        for _ in 0..count {
            let r = rng.random_range(0.8..a);
            let phi = rng.random_range(0.0..2.0 * PI);
            let size = rng.random_range(1.0..2.2);
            fill_ellipse(
                &mut frame,
                cx + r * phi.cos(),
                cy + r * phi.sin(),
                size,
                size,
                0.0,
                scene.spot_level,
            );
        }
    } else {
        fill_ellipse(
            &mut frame,
            cx,
            cy,
            a,
            b,
            scene.astigmatism_angle,
            scene.spot_level,
        );
        if scene.occlusion_fraction > 0.0 {
            let blob = scene.occlusion_blob_radius;
            let count = (scene.occlusion_fraction * a * b / (blob * blob)).round() as usize;
            let (s, c) = scene.astigmatism_angle.sin_cos();
            for _ in 0..count {
                // Uniform over the ellipse area.
                let r = rng.random::<f64>().sqrt();
                let phi = rng.random_range(0.0..2.0 * PI);
                let (u, w) = (a * r * phi.cos(), b * r * phi.sin());
                fill_ellipse(
                    &mut frame,
                    cx + u * c - w * s,
                    cy + u * s + w * c,
                    blob,
                    blob,
                    0.0,
                    scene.background_level,
                );
            }
        }
    }

    if scene.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, scene.noise_sigma)
            .map_err(|e| SimulateError::InvalidConfig(e.to_string()))?;
        for p in frame.pixels_mut() {
            let noisy = *p as f64 + normal.sample(&mut rng);
            *p = noisy.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(frame)
}

/// Sets every pixel whose centre lies inside the ellipse.
fn fill_ellipse(frame: &mut Frame, cx: f64, cy: f64, a: f64, b: f64, angle: f64, value: u8) {
    let (s, c) = angle.sin_cos();
    let reach = a.max(b) + 1.0;
    let x0 = (cx - reach).floor().max(0.0) as u32;
    let y0 = (cy - reach).floor().max(0.0) as u32;
    let x1 = ((cx + reach).ceil() as i64).min(frame.width() as i64 - 1);
    let y1 = ((cy + reach).ceil() as i64).min(frame.height() as i64 - 1);
    if x1 < 0 || y1 < 0 {
        return;
    }
    for y in y0..=y1 as u32 {
        for x in x0..=x1 as u32 {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let u = (dx * c + dy * s) / a;
            let w = (-dx * s + dy * c) / b;
            if u * u + w * w <= 1.0 {
                frame.set(x, y, value);
            }
        }
    }
}

/// One entry of a simulated fill sweep.
#[derive(Debug, Clone)]
pub struct SweepSample {
    pub volume: f64,
    pub frame: Frame,
    pub expected_perimeter: f64,
}

/// Evenly spaced volumes from `v_start` to `v_end` inclusive.
pub fn sweep_volumes(v_start: f64, v_end: f64, steps: usize) -> Result<Vec<f64>> {
    if !(v_start < v_end) || steps < 2 || v_start < 0.0 {
        return Err(SimulateError::InvalidConfig(format!(
            "sweep needs 0 <= v_start < v_end and steps >= 2, got {v_start}..{v_end} x {steps}"
        )));
    }
    let step = (v_end - v_start) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| {
            if i == steps - 1 {
                v_end
            } else {
                v_start + i as f64 * step
            }
        })
        .collect())
}

pub fn sweep(
    scene: &SceneConfig,
    v_start: f64,
    v_end: f64,
    steps: usize,
) -> Result<Vec<SweepSample>> {
    let model = ResponseModel::new(scene)?;
    sweep_volumes(v_start, v_end, steps)?
        .into_iter()
        .map(|volume| {
            Ok(SweepSample {
                volume,
                frame: render_frame(scene, volume)?,
                expected_perimeter: model.perimeter(volume),
            })
        })
        .collect()
}

/// Header of the manifest written by [`write_sweep`].
pub const MANIFEST_HEADER: &str = "volume_ml,frame_path,expected_perimeter_px";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Scene(#[from] SimulateError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// One manifest row; `frame_path` is relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub volume: f64,
    pub frame_path: String,
    pub expected_perimeter: f64,
}

/// Renders a sweep into `out_dir` as `frame_NNNN.pgm` files plus `manifest.csv`.
pub fn write_sweep(
    scene: &SceneConfig,
    v_start: f64,
    v_end: f64,
    steps: usize,
    out_dir: &Path,
) -> std::result::Result<Vec<ManifestEntry>, DatasetError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DatasetError::Io { path, source }
    };
    let model = ResponseModel::new(scene)?;
    let volumes = sweep_volumes(v_start, v_end, steps)?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let width = steps.to_string().len().max(4);
    let mut entries = Vec::with_capacity(steps);
    let mut manifest = String::from(MANIFEST_HEADER);
    manifest.push('\n');
    for (i, &volume) in volumes.iter().enumerate() {
        let name = format!("frame_{i:0width$}.pgm");
        let path = out_dir.join(&name);
        let frame = render_frame(scene, volume)?;
        std::fs::write(&path, write_pgm(&frame)).map_err(io_err(&path))?;
        let expected_perimeter = model.perimeter(volume);
        manifest.push_str(&format!("{volume},{name},{expected_perimeter}\n"));
        entries.push(ManifestEntry {
            volume,
            frame_path: name,
            expected_perimeter,
        });
    }
    let path = out_dir.join("manifest.csv");
    std::fs::write(&path, manifest).map_err(io_err(&path))?;
    Ok(entries)
}
