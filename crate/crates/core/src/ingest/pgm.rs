//! Binary PGM (P5, maxval 255).

use super::IngestError;
use crate::vision::Frame;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments running to end of line.
    fn skip_blank(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c.is_ascii_whitespace() {
                self.pos += 1;
            } else if c == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, IngestError> {
        self.skip_blank();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(IngestError::MalformedHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| IngestError::MalformedHeader(format!("{what} out of range")))
    }
}

pub fn read_pgm(bytes: &[u8]) -> Result<Frame, IngestError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(IngestError::BadMagic);
    }
    let mut cur = Cursor { bytes, pos: 2 };
    if !cur
        .bytes
        .get(2)
        .is_some_and(|c| c.is_ascii_whitespace() || *c == b'#')
    {
        return Err(IngestError::MalformedHeader(
            "no separator after magic".into(),
        ));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(IngestError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(IngestError::UnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(IngestError::MalformedHeader(
                "missing raster separator".into(),
            ))
        }
    }
    let expected = width as usize * height as usize;
    let raster = &bytes[cur.pos..];
    if raster.len() < expected {
        return Err(IngestError::TruncatedRaster {
            expected,
            got: raster.len(),
        });
    }
    if raster.len() > expected {
        return Err(IngestError::MalformedHeader(format!(
            "{} bytes of trailing data",
            raster.len() - expected
        )));
    }
    Frame::new(width, height, raster.to_vec())
        .map_err(|e| IngestError::MalformedHeader(e.to_string()))
}

/// Canonical encoding: `P5\n<w> <h>\n255\n` followed by the raster.
pub fn write_pgm(frame: &Frame) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", frame.width(), frame.height());
    let mut out = Vec::with_capacity(header.len() + frame.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(frame.pixels());
    out
}
