use super::VisionError;

/// 8-bit grayscale image, row-major. Pixel `(x, y)` has its centre at
/// integer coordinates `(x, y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
    /// Seconds since the start of the source, when known.
    pub timestamp: Option<Timestamp>,
}

/// Monotonic seconds; wrapped so `Frame` can stay `Eq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(u64);

impl Timestamp {
    pub fn from_secs_f64(secs: f64) -> Self {
        Timestamp((secs.max(0.0) * 1e9).round() as u64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }
}

impl Frame {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, VisionError> {
        if width == 0 || height == 0 {
            return Err(VisionError::InvalidFrame(format!(
                "dimensions must be >= 1, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(VisionError::InvalidFrame(format!(
                "expected {expected} pixels for {width}x{height}, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            timestamp: None,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self, VisionError> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn with_timestamp(mut self, secs: f64) -> Self {
        self.timestamp = Some(Timestamp::from_secs_f64(secs));
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        self.pixels[y as usize * self.width as usize + x as usize] = value;
    }

    /// Geometric centre in pixel coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length() {
        assert!(Frame::new(2, 2, vec![0; 3]).is_err());
        assert!(Frame::new(0, 2, vec![]).is_err());
        let f = Frame::new(2, 2, vec![0, 64, 128, 255]).unwrap();
        assert_eq!(f.get(1, 1), 255);
        assert_eq!(f.get(1, 0), 64);
    }

    #[test]
    fn timestamp_round_trip() {
        let t = Timestamp::from_secs_f64(1.25);
        assert_eq!(t.as_secs_f64(), 1.25);
    }
}
