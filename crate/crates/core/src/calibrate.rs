//! Perimeter ↔ volume calibration curves.
//!
//! Models are polynomials with ascending-power coefficients in the raw
//! independent variable (ml or px). Least-squares fits are solved by
//! Householder QR on a centred, scaled Vandermonde matrix and then expanded
//! back to raw powers.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulate::{region_of, MeniscusProfile, Region};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("calibration points share the same independent value {0}")]
    DegeneratePoints(f64),
    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("design matrix is rank deficient ({distinct} distinct abscissae for order {order})")]
    RankDeficient { distinct: usize, order: usize },
    #[error("sweep has fewer than two points in region {0}")]
    RegionNotCovered(Region),
    #[error("model is not monotone over its valid range")]
    NotMonotone,
    #[error("target {target} outside model image [{lo}, {hi}]")]
    OutOfRange { target: f64, lo: f64, hi: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, CalibrationError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Volume in, perimeter out.
    #[serde(rename = "v2p")]
    VolumeToPerimeter,
    /// Perimeter in, volume out.
    #[serde(rename = "p2v")]
    PerimeterToVolume,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "linear_2pt")]
    Linear2pt,
    #[serde(rename = "poly_ls")]
    PolyLs,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear2pt => "linear_2pt",
            ModelKind::PolyLs => "poly_ls",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPoint {
    /// ml
    pub volume: f64,
    /// px
    pub perimeter: f64,
    pub region: Option<Region>,
}

impl CalibrationPoint {
    pub fn new(volume: f64, perimeter: f64) -> Self {
        Self {
            volume,
            perimeter,
            region: None,
        }
    }

    fn xy(&self, direction: Direction) -> (f64, f64) {
        match direction {
            Direction::VolumeToPerimeter => (self.volume, self.perimeter),
            Direction::PerimeterToVolume => (self.perimeter, self.volume),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelMetadata {
    pub well_id: String,
    pub created_utc: String,
    pub points_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    pub kind: ModelKind,
    pub order: usize,
    pub direction: Direction,
    /// Ascending powers of the independent variable.
    pub coefficients: Vec<f64>,
    pub valid_range: (f64, f64),
    pub metadata: ModelMetadata,
}

/// Result of evaluating a model, flagged when outside the fitted range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub extrapolated: bool,
}

fn horner(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn created_now() -> String {
    chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

impl CalibrationModel {
    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(CalibrationError::InvalidModel("order must be >= 1".into()));
        }
        if self.coefficients.len() != self.order + 1 {
            return Err(CalibrationError::InvalidModel(format!(
                "order {} needs {} coefficients, got {}",
                self.order,
                self.order + 1,
                self.coefficients.len()
            )));
        }
        if self.kind == ModelKind::Linear2pt && self.order != 1 {
            return Err(CalibrationError::InvalidModel(
                "linear_2pt must have order 1".into(),
            ));
        }
        if !self.coefficients.iter().all(|c| c.is_finite()) {
            return Err(CalibrationError::InvalidModel(
                "non-finite coefficient".into(),
            ));
        }
        let (lo, hi) = self.valid_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CalibrationError::InvalidModel(format!(
                "valid_range [{lo}, {hi}] is empty"
            )));
        }
        Ok(())
    }

    pub fn in_range(&self, x: f64) -> bool {
        x >= self.valid_range.0 && x <= self.valid_range.1
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let d: Vec<f64> = self
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| k as f64 * c)
            .collect();
        horner(&d, x)
    }

    pub fn with_well_id(mut self, id: impl Into<String>) -> Self {
        self.metadata.well_id = id.into();
        self
    }
}

pub fn evaluate(model: &CalibrationModel, x: f64) -> Evaluation {
    Evaluation {
        value: horner(&model.coefficients, x),
        extrapolated: !model.in_range(x),
    }
}

/// Exact line through two points.
pub fn fit_linear_2pt(
    p1: &CalibrationPoint,
    p2: &CalibrationPoint,
    direction: Direction,
) -> Result<CalibrationModel> {
    let (x1, y1) = p1.xy(direction);
    let (x2, y2) = p2.xy(direction);
    if x1 == x2 {
        return Err(CalibrationError::DegeneratePoints(x1));
    }
    let slope = (y2 - y1) / (x2 - x1);
    let intercept = y1 - slope * x1;
    Ok(CalibrationModel {
        kind: ModelKind::Linear2pt,
        order: 1,
        direction,
        coefficients: vec![intercept, slope],
        valid_range: (x1.min(x2), x1.max(x2)),
        metadata: ModelMetadata {
            well_id: String::new(),
            created_utc: created_now(),
            points_used: 2,
        },
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Least-squares polynomial of the given order.
pub fn fit_poly_ls(
    points: &[CalibrationPoint],
    order: usize,
    direction: Direction,
) -> Result<CalibrationModel> {
    if order < 1 {
        return Err(CalibrationError::InvalidModel("order must be >= 1".into()));
    }
    let cols = order + 1;
    if points.len() < cols {
        return Err(CalibrationError::InsufficientPoints {
            needed: cols,
            got: points.len(),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|p| p.xy(direction)).unzip();
    let mut distinct = xs.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < cols {
        return Err(CalibrationError::RankDeficient {
            distinct: distinct.len(),
            order,
        });
    }

    let lo = distinct[0];
    let hi = *distinct.last().expect("non-empty");
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let n = xs.len();
    let design = DMatrix::from_fn(n, cols, |i, k| ((xs[i] - center) / half).powi(k as i32));
    let rhs = DVector::from_vec(ys);
    let qr = design.qr();
    let r = qr.r();
    let diag_max = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..cols).any(|i| r[(i, i)].abs() <= 1e-12 * diag_max) {
        return Err(CalibrationError::RankDeficient {
            distinct: distinct.len(),
            order,
        });
    }
    let qty = qr.q().transpose() * rhs;
    let scaled = r
        .solve_upper_triangular(&qty)
        .ok_or(CalibrationError::RankDeficient {
            distinct: distinct.len(),
            order,
        })?;

    // Σ c_k ((x - m)/s)^k  →  Σ a_j x^j
    let mut coefficients = vec![0.0; cols];
    for (k, &c) in scaled.iter().enumerate() {
        let ck = c / half.powi(k as i32);
        for (j, a) in coefficients.iter_mut().enumerate().take(k + 1) {
            *a += ck * binomial(k, j) * (-center).powi((k - j) as i32);
        }
    }

    Ok(CalibrationModel {
        kind: ModelKind::PolyLs,
        order,
        direction,
        coefficients,
        valid_range: (lo, hi),
        metadata: ModelMetadata {
            well_id: String::new(),
            created_utc: created_now(),
            points_used: n,
        },
    })
}

/// Signed residuals `y - f(x)` of a model over points.
pub fn residuals(model: &CalibrationModel, points: &[CalibrationPoint]) -> Vec<f64> {
    points
        .iter()
        .map(|p| {
            let (x, y) = p.xy(model.direction);
            y - horner(&model.coefficients, x)
        })
        .collect()
}

pub fn residual_sum_of_squares(model: &CalibrationModel, points: &[CalibrationPoint]) -> f64 {
    residuals(model, points).iter().map(|r| r * r).sum()
}

/// Two points per region A, B and C, nearest 25% and 75% through the part
/// of each region the sweep covers. Overflow points are never used.
pub fn select_calibration_points(
    sweep: &[(f64, f64)],
    profile: &MeniscusProfile,
) -> Result<Vec<CalibrationPoint>> {
    let mut chosen = Vec::with_capacity(6);
    for region in [Region::A, Region::B, Region::C] {
        let members: Vec<(f64, f64)> = sweep
            .iter()
            .copied()
            .filter(|&(v, _)| region_of(v, profile) == region)
            .collect();
        if members.len() < 2 {
            return Err(CalibrationError::RegionNotCovered(region));
        }
        let lo = members.iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
        let hi = members
            .iter()
            .map(|m| m.0)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut taken: Vec<usize> = Vec::with_capacity(2);
        for frac in [0.25, 0.75] {
            let target = lo + frac * (hi - lo);
            let idx = members
                .iter()
                .enumerate()
                .filter(|(i, _)| !taken.contains(i))
                .min_by(|(_, a), (_, b)| {
                    (a.0 - target)
                        .abs()
                        .total_cmp(&(b.0 - target).abs())
                        .then(a.0.total_cmp(&b.0))
                })
                .map(|(i, _)| i)
                .expect("at least two members");
            taken.push(idx);
        }
        taken.sort_by(|&a, &b| members[a].0.total_cmp(&members[b].0));
        chosen.extend(taken.into_iter().map(|i| CalibrationPoint {
            volume: members[i].0,
            perimeter: members[i].1,
            region: Some(region),
        }));
    }
    Ok(chosen)
}

const MONOTONE_SAMPLES: usize = 64;

/// Sign of the slope (+1 or -1) when the derivative keeps one strict sign at
/// 64 points across the valid range.
pub fn check_monotone(model: &CalibrationModel) -> Result<f64> {
    let (lo, hi) = model.valid_range;
    let mut sign = 0.0;
    for i in 0..MONOTONE_SAMPLES {
        let x = lo + (hi - lo) * i as f64 / (MONOTONE_SAMPLES - 1) as f64;
        let d = model.derivative(x);
        let s = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            return Err(CalibrationError::NotMonotone);
        };
        if sign == 0.0 {
            sign = s;
        } else if s != sign {
            return Err(CalibrationError::NotMonotone);
        }
    }
    Ok(sign)
}

/// Solves `f(x) = y` on the valid range by bisection.
pub fn invert(model: &CalibrationModel, y: f64) -> Result<f64> {
    let sign = check_monotone(model)?;
    let (mut lo, mut hi) = model.valid_range;
    let f_lo = horner(&model.coefficients, lo);
    let f_hi = horner(&model.coefficients, hi);
    let (img_lo, img_hi) = (f_lo.min(f_hi), f_lo.max(f_hi));
    if !(y >= img_lo && y <= img_hi) {
        return Err(CalibrationError::OutOfRange {
            target: y,
            lo: img_lo,
            hi: img_hi,
        });
    }
    let tol = 1e-9 * y.abs();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g = horner(&model.coefficients, mid) - y;
        if g.abs() <= tol || hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            return Ok(mid);
        }
        if (g > 0.0) == (sign > 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Volume (ml) for a measured perimeter: direct evaluation for p2v models,
/// numerical inversion for v2p ones. A v2p model is continued linearly from
/// the nearer end of its range when the perimeter falls outside its image;
/// such estimates are flagged as extrapolated.
pub fn estimate_volume(model: &CalibrationModel, perimeter: f64) -> Result<Evaluation> {
    match model.direction {
        Direction::PerimeterToVolume => Ok(evaluate(model, perimeter)),
        Direction::VolumeToPerimeter => {
            let (lo, hi) = model.valid_range;
            let f_lo = horner(&model.coefficients, lo);
            let f_hi = horner(&model.coefficients, hi);
            if perimeter >= f_lo.min(f_hi) && perimeter <= f_lo.max(f_hi) {
                return Ok(Evaluation {
                    value: invert(model, perimeter)?,
                    extrapolated: false,
                });
            }
            check_monotone(model)?;
            let (x, y) = if (perimeter - f_lo).abs() < (perimeter - f_hi).abs() {
                (lo, f_lo)
            } else {
                (hi, f_hi)
            };
            let slope = model.derivative(x);
            if slope == 0.0 {
                return Err(CalibrationError::NotMonotone);
            }
            Ok(Evaluation {
                value: x + (perimeter - y) / slope,
                extrapolated: true,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorStats {
    pub count: usize,
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
}

impl ErrorStats {
    fn from_errors(errors: &[f64]) -> Self {
        if errors.is_empty() {
            return Self::default();
        }
        Self {
            count: errors.len(),
            mean_abs_error: errors.iter().map(|e| e.abs()).sum::<f64>() / errors.len() as f64,
            max_abs_error: errors.iter().map(|e| e.abs()).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointError {
    pub volume: f64,
    pub perimeter: f64,
    pub estimate: f64,
    /// µl, estimate minus truth.
    pub error_ul: f64,
    pub extrapolated: bool,
    pub region: Option<Region>,
}

/// Volume errors in µl.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub points: Vec<PointError>,
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
    pub per_region: BTreeMap<Region, ErrorStats>,
}

pub fn error_report(
    model: &CalibrationModel,
    truth: &[(f64, f64)],
    profile: Option<&MeniscusProfile>,
) -> Result<ErrorReport> {
    let mut points = Vec::with_capacity(truth.len());
    for &(volume, perimeter) in truth {
        let est = estimate_volume(model, perimeter)?;
        points.push(PointError {
            volume,
            perimeter,
            estimate: est.value,
            error_ul: (est.value - volume) * 1000.0,
            extrapolated: est.extrapolated,
            region: profile.map(|p| region_of(volume, p)),
        });
    }
    let all: Vec<f64> = points.iter().map(|p| p.error_ul).collect();
    let overall = ErrorStats::from_errors(&all);
    let mut per_region = BTreeMap::new();
    if profile.is_some() {
        for region in Region::ALL {
            let errs: Vec<f64> = points
                .iter()
                .filter(|p| p.region == Some(region))
                .map(|p| p.error_ul)
                .collect();
            if !errs.is_empty() {
                per_region.insert(region, ErrorStats::from_errors(&errs));
            }
        }
    }
    Ok(ErrorReport {
        points,
        mean_abs_error: overall.mean_abs_error,
        max_abs_error: overall.max_abs_error,
        per_region,
    })
}

/// On-disk form of a model. Field order is the serialized order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    version: u32,
    well_id: String,
    kind: ModelKind,
    order: usize,
    direction: Direction,
    coefficients: Vec<f64>,
    valid_range: [f64; 2],
    created_utc: String,
    points_used: usize,
}

const MODEL_VERSION: u32 = 1;

impl CalibrationModel {
    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            version: MODEL_VERSION,
            well_id: self.metadata.well_id.clone(),
            kind: self.kind,
            order: self.order,
            direction: self.direction,
            coefficients: self.coefficients.clone(),
            valid_range: [self.valid_range.0, self.valid_range.1],
            created_utc: self.metadata.created_utc.clone(),
            points_used: self.metadata.points_used,
        };
        serde_json::to_string_pretty(&doc).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)
            .map_err(|e| CalibrationError::InvalidModel(e.to_string()))?;
        if doc.version != MODEL_VERSION {
            return Err(CalibrationError::InvalidModel(format!(
                "unsupported model version {}",
                doc.version
            )));
        }
        let model = Self {
            kind: doc.kind,
            order: doc.order,
            direction: doc.direction,
            coefficients: doc.coefficients,
            valid_range: (doc.valid_range[0], doc.valid_range[1]),
            metadata: ModelMetadata {
                well_id: doc.well_id,
                created_utc: doc.created_utc,
                points_used: doc.points_used,
            },
        };
        model.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(v: f64, p: f64) -> CalibrationPoint {
        CalibrationPoint::new(v, p)
    }

    #[test]
    fn two_point_line() {
        let m = fit_linear_2pt(
            &pt(0.5, 80.0),
            &pt(2.0, 140.0),
            Direction::VolumeToPerimeter,
        )
        .unwrap();
        assert_abs_diff_eq!(m.coefficients[1], 40.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.coefficients[0], 60.0, epsilon = 1e-12);
        assert_abs_diff_eq!(evaluate(&m, 1.25).value, 110.0, epsilon = 1e-12);
        assert_eq!(m.valid_range, (0.5, 2.0));
        assert_abs_diff_eq!(invert(&m, 110.0).unwrap(), 1.25, epsilon = 1e-9);
        assert!(matches!(
            fit_linear_2pt(&pt(1.0, 80.0), &pt(1.0, 90.0), Direction::VolumeToPerimeter),
            Err(CalibrationError::DegeneratePoints(_))
        ));
    }

    #[test]
    fn quadratic_interpolation() {
        let pts = [pt(0.0, 1.0), pt(1.0, 3.0), pt(2.0, 7.0)];
        let m = fit_poly_ls(&pts, 2, Direction::VolumeToPerimeter).unwrap();
        for (c, e) in m.coefficients.iter().zip([1.0, 1.0, 1.0]) {
            assert_abs_diff_eq!(*c, e, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(evaluate(&m, 2.0).value, 7.0, epsilon = 1e-12);
    }

    #[test]
    fn collinear_points() {
        let pts: Vec<_> = (0..10)
            .map(|i| pt(i as f64 * 0.3, 2.5 * i as f64 * 0.3 - 1.0))
            .collect();
        let m = fit_poly_ls(&pts, 1, Direction::VolumeToPerimeter).unwrap();
        assert_abs_diff_eq!(m.coefficients[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.coefficients[1], 2.5, epsilon = 1e-12);
        assert!(residual_sum_of_squares(&m, &pts).sqrt() < 1e-9);
    }

    #[test]
    fn fit_errors() {
        let pts = [pt(0.0, 1.0), pt(1.0, 2.0), pt(2.0, 5.0)];
        assert_eq!(
            fit_poly_ls(&pts, 3, Direction::VolumeToPerimeter),
            Err(CalibrationError::InsufficientPoints { needed: 4, got: 3 })
        );
        let dup = [pt(1.0, 1.0), pt(1.0, 2.0), pt(2.0, 5.0), pt(2.0, 6.0)];
        assert!(matches!(
            fit_poly_ls(&dup, 2, Direction::VolumeToPerimeter),
            Err(CalibrationError::RankDeficient { .. })
        ));
    }

    #[test]
    fn evaluation_flags() {
        let m = fit_poly_ls(
            &[pt(0.0, 1.0), pt(1.0, 3.0), pt(2.0, 7.0)],
            2,
            Direction::VolumeToPerimeter,
        )
        .unwrap();
        assert!(!evaluate(&m, m.valid_range.0).extrapolated);
        let out = evaluate(&m, 3.0);
        assert!(out.extrapolated);
        assert_abs_diff_eq!(out.value, 13.0, epsilon = 1e-12);
    }

    #[test]
    fn non_monotone_rejected() {
        // 1 - (x - 1)² has its peak at x = 1 inside [0, 2].
        let m = fit_poly_ls(
            &[pt(0.0, 0.0), pt(1.0, 1.0), pt(2.0, 0.0)],
            2,
            Direction::VolumeToPerimeter,
        )
        .unwrap();
        assert_eq!(invert(&m, 0.5), Err(CalibrationError::NotMonotone));
    }

    #[test]
    fn invert_out_of_range() {
        let m = fit_linear_2pt(
            &pt(0.5, 80.0),
            &pt(2.0, 140.0),
            Direction::VolumeToPerimeter,
        )
        .unwrap();
        assert!(matches!(
            invert(&m, 200.0),
            Err(CalibrationError::OutOfRange { .. })
        ));
    }

    #[test]
    fn selection_on_grid() {
        let profile = MeniscusProfile {
            v_film: 0.5,
            v_invert: 2.2,
            v_overflow: 2.6,
            ..MeniscusProfile::default()
        };
        let sweep: Vec<(f64, f64)> = (0..21)
            .map(|i| {
                let v = 0.2 + 2.3 * i as f64 / 20.0;
                (v, 500.0 + 10.0 * v)
            })
            .collect();
        let chosen = select_calibration_points(&sweep, &profile).unwrap();
        assert_eq!(chosen.len(), 6);
        assert_eq!(chosen.iter().filter(|p| p.volume < 0.5).count(), 2);
        assert_eq!(
            chosen
                .iter()
                .filter(|p| (0.5..2.2).contains(&p.volume))
                .count(),
            2
        );
        assert_eq!(
            chosen
                .iter()
                .filter(|p| (2.2..=2.5).contains(&p.volume))
                .count(),
            2
        );
        let only_b: Vec<(f64, f64)> = (0..10).map(|i| (1.0 + 0.1 * i as f64, 1.0)).collect();
        assert_eq!(
            select_calibration_points(&only_b, &profile),
            Err(CalibrationError::RegionNotCovered(Region::A))
        );
    }

    #[test]
    fn selection_boundaries_half_open() {
        let profile = MeniscusProfile::default();
        let sweep = [
            (0.1, 1.0),
            (0.3, 1.0),
            (0.5, 1.0),
            (1.0, 1.0),
            (2.2, 1.0),
            (2.4, 1.0),
            (2.6, 1.0),
        ];
        let chosen = select_calibration_points(&sweep, &profile).unwrap();
        let vols: Vec<f64> = chosen.iter().map(|p| p.volume).collect();
        assert_eq!(vols, vec![0.1, 0.3, 0.5, 1.0, 2.2, 2.4]);
        assert_eq!(chosen[2].region, Some(Region::B));
        assert_eq!(chosen[4].region, Some(Region::C));
    }

    #[test]
    fn reports() {
        let m = fit_linear_2pt(
            &pt(500.0, 0.5),
            &pt(560.0, 2.0),
            Direction::PerimeterToVolume,
        )
        .unwrap();
        let truth: Vec<(f64, f64)> = (0..10)
            .map(|i| {
                let p = 500.0 + 6.0 * i as f64;
                (evaluate(&m, p).value, p)
            })
            .collect();
        let r = error_report(&m, &truth, None).unwrap();
        assert!(r.mean_abs_error < 1e-9 && r.max_abs_error < 1e-9);

        let shifted: Vec<(f64, f64)> = truth.iter().map(|&(v, p)| (v - 0.05, p)).collect();
        let r = error_report(&m, &shifted, Some(&MeniscusProfile::default())).unwrap();
        assert_abs_diff_eq!(r.mean_abs_error, 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.max_abs_error, 50.0, epsilon = 1e-9);
        let max = r
            .points
            .iter()
            .map(|p| p.error_ul.abs())
            .fold(0.0, f64::max);
        assert_eq!(r.max_abs_error, max);
        assert!(!r.per_region.is_empty());
    }

    #[test]
    fn json_schema_exact() {
        let mut m = fit_linear_2pt(
            &pt(0.5, 80.0),
            &pt(2.0, 140.0),
            Direction::PerimeterToVolume,
        )
        .unwrap()
        .with_well_id("A1");
        m.metadata.created_utc = "2024-01-01T00:00:00Z".into();
        let text = m.to_json();
        let keys: Vec<&str> = text
            .lines()
            .filter_map(|l| l.trim().strip_prefix('"'))
            .filter_map(|l| l.split('"').next())
            .collect();
        assert_eq!(
            keys,
            [
                "version",
                "well_id",
                "kind",
                "order",
                "direction",
                "coefficients",
                "valid_range",
                "created_utc",
                "points_used"
            ]
        );
        assert!(text.contains("\"kind\": \"linear_2pt\""));
        assert!(text.contains("\"direction\": \"p2v\""));
        assert_eq!(CalibrationModel::from_json(&text).unwrap(), m);

        let extra = text.replacen('{', "{\"extra\": 1,", 1);
        assert!(CalibrationModel::from_json(&extra).is_err());
        let v2 = text.replacen("\"version\": 1", "\"version\": 2", 1);
        assert!(CalibrationModel::from_json(&v2).is_err());
    }

    #[test]
    fn v2p_estimate_extrapolates_linearly() {
        let m = fit_linear_2pt(
            &CalibrationPoint::new(0.5, 80.0),
            &CalibrationPoint::new(2.0, 140.0),
            Direction::VolumeToPerimeter,
        )
        .unwrap();
        let inside = estimate_volume(&m, 110.0).unwrap();
        assert!(!inside.extrapolated);
        assert!((inside.value - 1.25).abs() < 1e-9);
        let outside = estimate_volume(&m, 160.0).unwrap();
        assert!(outside.extrapolated);
        assert!((outside.value - 2.5).abs() < 1e-12);
        let below = estimate_volume(&m, 60.0).unwrap();
        assert!(below.extrapolated && below.value.abs() < 1e-12);
    }
}
