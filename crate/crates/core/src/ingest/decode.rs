use image::{DynamicImage, ImageError, ImageFormat};

use super::{pgm, ImageKind, IngestError};
use crate::vision::Frame;

/// Integer BT.601 luma, rounded half up.
#[inline]
pub fn luma_bt601(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

fn map_err(e: ImageError) -> IngestError {
    match e {
        ImageError::Unsupported(u) => IngestError::UnsupportedFormat(u.to_string()),
        other => IngestError::CorruptImage(other.to_string()),
    }
}

/// Decodes PGM, PNG or JPEG bytes to an 8-bit grayscale frame.
pub fn decode_image(bytes: &[u8], hint: Option<ImageKind>) -> Result<Frame, IngestError> {
    let kind = match hint {
        Some(k) => k,
        None => sniff(bytes)?,
    };
    let format = match kind {
        ImageKind::Pgm => return pgm::read_pgm(bytes),
        ImageKind::Png => ImageFormat::Png,
        ImageKind::Jpeg => {
            if !has_jpeg_eoi(bytes) {
                return Err(IngestError::CorruptImage(
                    "missing JPEG end-of-image marker".into(),
                ));
            }
            ImageFormat::Jpeg
        }
    };
    let img = image::load_from_memory_with_format(bytes, format).map_err(map_err)?;
    let (w, h) = (img.width(), img.height());
    let pixels = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageLuma16(buf) => buf.pixels().map(|p| (p.0[0] >> 8) as u8).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luma_bt601(p.0[0], p.0[1], p.0[2]))
            .collect(),
    };
    Frame::new(w, h, pixels).map_err(|e| IngestError::CorruptImage(e.to_string()))
}

/// Decoders tend to pad truncated scans with grey, so require the EOI
/// marker, ignoring trailing padding.
fn has_jpeg_eoi(bytes: &[u8]) -> bool {
    let end = bytes
        .iter()
        .rposition(|&b| !matches!(b, 0 | b'\r' | b'\n' | b' '))
        .map_or(0, |i| i + 1);
    end >= 2 && bytes[end - 2..end] == [0xFF, 0xD9]
}

fn sniff(bytes: &[u8]) -> Result<ImageKind, IngestError> {
    if bytes.starts_with(b"P5") {
        return Ok(ImageKind::Pgm);
    }
    match image::guess_format(bytes) {
        Ok(ImageFormat::Png) => Ok(ImageKind::Png),
        Ok(ImageFormat::Jpeg) => Ok(ImageKind::Jpeg),
        Ok(f) => Err(IngestError::UnsupportedFormat(format!("{f:?}"))),
        Err(_) => Err(IngestError::UnsupportedFormat(
            "unrecognized image signature".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{ImageBuffer, Luma, Rgb};
    use std::io::Cursor;

    fn png_rgb(px: [u8; 3]) -> Vec<u8> {
        let img: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_pixel(1, 1, Rgb(px));
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).unwrap();
        out.into_inner()
    }

    #[test]
    fn red_pixel_luma() {
        let f = decode_image(&png_rgb([255, 0, 0]), Some(ImageKind::Png)).unwrap();
        assert_eq!(f.pixels(), &[76]);
        assert_eq!(
            decode_image(&png_rgb([0, 255, 0]), None).unwrap().pixels(),
            &[150]
        );
        assert_eq!(
            decode_image(&png_rgb([255, 255, 255]), None)
                .unwrap()
                .pixels(),
            &[255]
        );
    }

    #[test]
    fn gray_png_passes_through() {
        let img: ImageBuffer<Luma<u8>, _> =
            ImageBuffer::from_fn(3, 2, |x, y| Luma([(x * 40 + y * 7) as u8]));
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).unwrap();
        let f = decode_image(out.get_ref(), None).unwrap();
        assert_eq!(f.pixels(), img.as_raw().as_slice());
    }

    #[test]
    fn truncated_jpeg_is_corrupt() {
        let img: ImageBuffer<Luma<u8>, _> =
            ImageBuffer::from_fn(32, 32, |x, _| Luma([x as u8 * 8]));
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Jpeg).unwrap();
        let bytes = out.into_inner();
        let cut = &bytes[..bytes.len() / 2];
        assert!(matches!(
            decode_image(cut, Some(ImageKind::Jpeg)),
            Err(IngestError::CorruptImage(_))
        ));
        // Decoding twice is stable.
        assert_eq!(
            decode_image(&bytes, None).unwrap(),
            decode_image(&bytes, None).unwrap()
        );
    }

    #[test]
    fn unknown_bytes_rejected() {
        assert!(matches!(
            decode_image(b"GIF89a....", None),
            Err(IngestError::UnsupportedFormat(_))
        ));
    }
}
