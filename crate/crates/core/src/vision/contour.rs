use std::collections::VecDeque;

use super::{BinaryMask, VisionError, VisionParams};

/// Outer boundary of one 8-connected component, as pixel centres in
/// tracing order (clockwise on screen).
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub points: Vec<(i64, i64)>,
    /// Shoelace area enclosed by the boundary polygon, px².
    pub area: f64,
}

impl Contour {
    fn new(points: Vec<(i64, i64)>) -> Self {
        let area = shoelace(&points).abs() / 2.0;
        Self { points, area }
    }

    /// Polygon centroid; falls back to the vertex mean for zero-area chains.
    pub fn centroid(&self) -> (f64, f64) {
        let twice = shoelace(&self.points);
        if twice.abs() < 1e-9 {
            let n = self.points.len() as f64;
            let (sx, sy) = self
                .points
                .iter()
                .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x as f64, b + y as f64));
            return (sx / n, sy / n);
        }
        let n = self.points.len();
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let (x0, y0) = self.points[i];
            let (x1, y1) = self.points[(i + 1) % n];
            let cross = (x0 * y1 - x1 * y0) as f64;
            cx += (x0 + x1) as f64 * cross;
            cy += (y0 + y1) as f64 * cross;
        }
        (cx / (3.0 * twice), cy / (3.0 * twice))
    }

    pub fn points_f64(&self) -> Vec<[f64; 2]> {
        self.points
            .iter()
            .map(|&(x, y)| [x as f64, y as f64])
            .collect()
    }
}

fn shoelace(points: &[(i64, i64)]) -> f64 {
    let n = points.len();
    let mut s = 0i64;
    for i in 0..n {
        let (x0, y0) = points[i];
        let (x1, y1) = points[(i + 1) % n];
        s += x0 * y1 - x1 * y0;
    }
    s as f64
}

// Clockwise on screen (y down), starting east.
const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

fn dir_index(dx: i64, dy: i64) -> usize {
    DIRS.iter()
        .position(|&d| d == (dx, dy))
        .expect("offset between Moore neighbours")
}

/// Moore-neighbour trace from the raster-first pixel of a component.
fn trace(mask: &BinaryMask, start: (i64, i64)) -> Vec<(i64, i64)> {
    let mut points = vec![start];
    let mut current = start;
    // Raster-first pixel always has background to its west.
    let mut back = 4usize;
    let mut second: Option<(i64, i64)> = None;
    loop {
        let mut step = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let p = (current.0 + DIRS[d].0, current.1 + DIRS[d].1);
            if mask.get_signed(p.0, p.1) {
                step = Some((p, (back + k - 1) % 8));
                break;
            }
        }
        let Some((next, prev_d)) = step else {
            // Isolated pixel.
            break;
        };
        if current == start {
            match second {
                None => second = Some(next),
                Some(s) if s == next => {
                    points.pop();
                    break;
                }
                Some(_) => {}
            }
        }
        let backtrack = (current.0 + DIRS[prev_d].0, current.1 + DIRS[prev_d].1);
        back = dir_index(backtrack.0 - next.0, backtrack.1 - next.1);
        points.push(next);
        current = next;
    }
    points
}

/// One outer contour per 8-connected foreground component, in raster order
/// of each component's first pixel. Components whose boundary has fewer
/// than four pixels are dropped.
pub fn extract_contours(mask: &BinaryMask) -> Vec<Contour> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut seen = vec![false; (w * h) as usize];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            let idx = (y * w + x) as usize;
            if seen[idx] || !mask.get(x as u32, y as u32) {
                continue;
            }
            seen[idx] = true;
            queue.push_back((x, y));
            while let Some((cx, cy)) = queue.pop_front() {
                for (dx, dy) in DIRS {
                    let (nx, ny) = (cx + dx, cy + dy);
                    if mask.get_signed(nx, ny) {
                        let n = (ny * w + nx) as usize;
                        if !seen[n] {
                            seen[n] = true;
                            queue.push_back((nx, ny));
                        }
                    }
                }
            }
            let points = trace(mask, (x, y));
            if points.len() >= 4 {
                out.push(Contour::new(points));
            }
        }
    }
    out
}

/// Picks the contour nearest the image centre among those at least
/// `min_contour_area` in size; ties go to the larger contour.
pub fn central_contour<'a>(
    contours: &'a [Contour],
    frame_dims: (u32, u32),
    params: &VisionParams,
) -> Result<&'a Contour, VisionError> {
    let center = (
        (frame_dims.0 as f64 - 1.0) / 2.0,
        (frame_dims.1 as f64 - 1.0) / 2.0,
    );
    let score = |c: &Contour| {
        let (x, y) = c.centroid();
        let dist = ((x - center.0).powi(2) + (y - center.1).powi(2)).sqrt();
        dist - params.center_weight * (c.area / std::f64::consts::PI).sqrt()
    };
    contours
        .iter()
        .filter(|c| c.area >= params.min_contour_area)
        .map(|c| (score(c), c))
        .min_by(|(sa, ca), (sb, cb)| sa.total_cmp(sb).then_with(|| cb.area.total_cmp(&ca.area)))
        .map(|(_, c)| c)
        .ok_or(VisionError::NoContour)
}
