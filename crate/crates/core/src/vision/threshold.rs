use super::{Frame, ThresholdMode, VisionError, VisionParams};

/// Foreground/background mask with the frame's dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.set(x, y, f(x, y));
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Out-of-bounds coordinates read as background.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as u64) < self.width as u64
            && (y as u64) < self.height as u64
            && self.get(x as u32, y as u32)
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }
}

/// Otsu's level: the `t` maximizing between-class variance when pixels
/// `>= t` are foreground. Errors when the histogram has a single bin.
pub fn otsu_threshold(frame: &Frame) -> Result<u8, VisionError> {
    let mut hist = [0u64; 256];
    for &p in frame.pixels() {
        hist[p as usize] += 1;
    }
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(VisionError::DegenerateImage);
    }
    let total = frame.pixels().len() as f64;
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();

    let mut best_t = 1usize;
    let mut best_var = -1.0;
    let mut w_bg = 0.0;
    let mut sum_bg = 0.0;
    // Background is [0, t), foreground [t, 255].
    for t in 1..256 {
        w_bg += hist[t - 1] as f64;
        sum_bg += (t - 1) as f64 * hist[t - 1] as f64;
        let w_fg = total - w_bg;
        if w_bg == 0.0 || w_fg == 0.0 {
            continue;
        }
        let mean_bg = sum_bg / w_bg;
        let mean_fg = (sum_all - sum_bg) / w_fg;
        let var = w_bg * w_fg * (mean_bg - mean_fg).powi(2);
        if var > best_var {
            best_var = var;
            best_t = t;
        }
    }
    Ok(best_t as u8)
}

pub fn binarize(frame: &Frame, params: &VisionParams) -> Result<BinaryMask, VisionError> {
    let level = match params.threshold {
        ThresholdMode::Fixed(t) => t,
        ThresholdMode::Automatic => otsu_threshold(frame)?,
    };
    Ok(BinaryMask {
        width: frame.width(),
        height: frame.height(),
        data: frame.pixels().iter().map(|&p| p >= level).collect(),
    })
}
