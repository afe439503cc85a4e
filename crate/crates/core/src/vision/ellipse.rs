//! Direct least-squares ellipse fit.
//!
//! Minimizes the algebraic distance of a general conic
//! `A x² + B xy + C y² + D x + E y + F = 0` subject to `4AC - B² = 1`, which
//! admits only ellipses. The scatter matrix is split into quadratic and
//! linear blocks so the constrained problem reduces to a 3x3 eigenproblem.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use super::{Contour, VisionError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseFit {
    pub center: (f64, f64),
    /// Semi-major axis.
    pub a: f64,
    /// Semi-minor axis.
    pub b: f64,
    /// Direction of the major axis, in `[0, π)`.
    pub rotation: f64,
    pub perimeter: f64,
}

/// Ramanujan's second approximation to the circumference of an ellipse.
pub fn ellipse_perimeter(a: f64, b: f64) -> f64 {
    let (a, b) = if a >= b { (a, b) } else { (b, a) };
    if a + b == 0.0 {
        return 0.0;
    }
    let t = ((a - b) / (a + b)).powi(2);
    PI * (a + b) * (1.0 + 3.0 * t / (10.0 + (4.0 - 3.0 * t).sqrt()))
}

pub fn fit_ellipse(contour: &Contour) -> Result<EllipseFit, VisionError> {
    fit_ellipse_points(&contour.points_f64())
}

fn distinct_count(points: &[[f64; 2]]) -> usize {
    let mut v: Vec<(u64, u64)> = points
        .iter()
        .map(|p| (p[0].to_bits(), p[1].to_bits()))
        .collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

pub fn fit_ellipse_points(points: &[[f64; 2]]) -> Result<EllipseFit, VisionError> {
    let distinct = distinct_count(points);
    if distinct < 5 {
        return Err(VisionError::InsufficientPoints(distinct));
    }

    // Centre on the mean and scale to unit RMS radius.
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
    let (mx, my) = (mx / n, my / n);
    let rms = (points
        .iter()
        .map(|p| (p[0] - mx).powi(2) + (p[1] - my).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if !(rms > 0.0) {
        return Err(VisionError::DegenerateConic("points coincide"));
    }
    let scale = 1.0 / rms;

    let mut s1 = Matrix3::<f64>::zeros();
    let mut s2 = Matrix3::<f64>::zeros();
    let mut s3 = Matrix3::<f64>::zeros();
    for p in points {
        let x = (p[0] - mx) * scale;
        let y = (p[1] - my) * scale;
        let q = Vector3::new(x * x, x * y, y * y);
        let l = Vector3::new(x, y, 1.0);
        s1 += q * q.transpose();
        s2 += q * l.transpose();
        s3 += l * l.transpose();
    }

    let s3_inv = s3
        .try_inverse()
        .ok_or(VisionError::DegenerateConic("collinear points"))?;
    let t = -s3_inv * s2.transpose();
    let m = s1 + s2 * t;
    // Premultiply by the inverse of the constraint matrix [[0,0,2],[0,-1,0],[2,0,0]].
    let reduced = Matrix3::new(
        m[(2, 0)] / 2.0,
        m[(2, 1)] / 2.0,
        m[(2, 2)] / 2.0,
        -m[(1, 0)],
        -m[(1, 1)],
        -m[(1, 2)],
        m[(0, 0)] / 2.0,
        m[(0, 1)] / 2.0,
        m[(0, 2)] / 2.0,
    );

    let quad = pick_elliptic_eigenvector(&reduced)
        .ok_or(VisionError::DegenerateConic("no elliptic solution"))?;
    let lin = t * quad;
    let conic = [quad[0], quad[1], quad[2], lin[0], lin[1], lin[2]];

    let (cx, cy, a, b, rotation) = conic_to_ellipse(&conic)?;
    let center = (cx / scale + mx, cy / scale + my);
    let (a, b) = (a / scale, b / scale);
    Ok(EllipseFit {
        center,
        a,
        b,
        rotation,
        perimeter: ellipse_perimeter(a, b),
    })
}

/// Eigenvector of the reduced system satisfying `4AC - B² > 0`; among
/// several (numerical ties) the one with the smallest eigenvalue wins.
fn pick_elliptic_eigenvector(m: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let eig = m.complex_eigenvalues();
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let mut best: Option<(f64, Vector3<f64>)> = None;
    for lambda in eig.iter() {
        if lambda.im.abs() > 1e-9 * scale {
            continue;
        }
        let Some(v) = null_vector(&(m - Matrix3::identity() * lambda.re)) else {
            continue;
        };
        let constraint = 4.0 * v[0] * v[2] - v[1] * v[1];
        if constraint <= 0.0 {
            continue;
        }
        let better = match &best {
            None => true,
            Some((l, _)) => lambda.re.abs() < l.abs(),
        };
        if better {
            best = Some((lambda.re, v));
        }
    }
    best.map(|(_, v)| v)
}

/// Unit null vector of a (numerically) rank-2 3x3 matrix: the largest cross
/// product of two of its rows.
fn null_vector(m: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let rows = [
        m.row(0).transpose(),
        m.row(1).transpose(),
        m.row(2).transpose(),
    ];
    let candidates = [
        rows[0].cross(&rows[1]),
        rows[0].cross(&rows[2]),
        rows[1].cross(&rows[2]),
    ];
    let best = candidates
        .iter()
        .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))?;
    let norm = best.norm();
    if norm == 0.0 || !norm.is_finite() {
        // Rank <= 1: any vector orthogonal to the dominant row works; this
        // only happens for exactly degenerate input.
        return None;
    }
    Some(best / norm)
}

/// General conic to `(cx, cy, a, b, rotation)`.
fn conic_to_ellipse(c: &[f64; 6]) -> Result<(f64, f64, f64, f64, f64), VisionError> {
    let [a, b, cc, d, e, f] = *c;
    let disc = 4.0 * a * cc - b * b;
    if !(disc > 0.0) {
        return Err(VisionError::DegenerateConic("not an ellipse"));
    }
    let cx = (b * e - 2.0 * cc * d) / disc;
    let cy = (b * d - 2.0 * a * e) / disc;
    let f_center = a * cx * cx + b * cx * cy + cc * cy * cy + d * cx + e * cy + f;

    // Quadratic form [[a, b/2], [b/2, cc]] with the sign chosen so it is
    // positive definite and the ellipse is Q(x) = -f_center.
    let sign = if a + cc > 0.0 { 1.0 } else { -1.0 };
    let (p, q, r, rhs) = (sign * a, sign * b / 2.0, sign * cc, -sign * f_center);
    if !(rhs > 0.0) {
        return Err(VisionError::DegenerateConic("imaginary ellipse"));
    }
    let mean = 0.5 * (p + r);
    let dev = (0.25 * (p - r).powi(2) + q * q).sqrt();
    let (l_small, l_large) = (mean - dev, mean + dev);
    if !(l_small > 0.0) {
        return Err(VisionError::DegenerateConic("indefinite quadratic form"));
    }
    let major = (rhs / l_small).sqrt();
    let minor = (rhs / l_large).sqrt();
    // Eigenvector of the smaller eigenvalue points along the major axis.
    let v1 = (q, l_small - p);
    let v2 = (l_small - r, q);
    let (vx, vy) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) {
        v1
    } else {
        v2
    };
    let mut rotation = if vx == 0.0 && vy == 0.0 {
        0.0
    } else {
        vy.atan2(vx)
    };
    rotation = rotation.rem_euclid(PI);
    if rotation >= PI {
        rotation -= PI;
    }
    if !(major.is_finite() && minor.is_finite() && minor > 0.0) {
        return Err(VisionError::DegenerateConic("non-finite axes"));
    }
    Ok((cx, cy, major, minor, rotation))
}
