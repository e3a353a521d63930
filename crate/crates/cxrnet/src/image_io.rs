//! 8-bit PGM (P5) and PNG codecs.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use cxrnet_core::GrayImage;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("unsupported image format: {0}")]
    Unsupported(String),
    #[error("malformed image: {0}")]
    Malformed(String),
}

const PNG_SIGNATURE: &[u8; 8] = b"\x89PNG\r\n\x1a\n";

/// Reads one PGM header token, skipping whitespace and `#` comments.
fn pgm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], ImageError> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(ImageError::Malformed("truncated PGM header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

fn pgm_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize, ImageError> {
    let tok = pgm_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ImageError::Malformed(format!("PGM {what} {:?} is not a number", String::from_utf8_lossy(tok))))
}

/// Decodes a binary (P5) PGM with maxval 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let mut pos = 0;
    if pgm_token(bytes, &mut pos)? != b"P5" {
        return Err(ImageError::Unsupported("only binary P5 PGM files are supported".into()));
    }
    let width = pgm_number(bytes, &mut pos, "width")?;
    let height = pgm_number(bytes, &mut pos, "height")?;
    let maxval = pgm_number(bytes, &mut pos, "maxval")?;
    if maxval > 255 {
        return Err(ImageError::Unsupported(format!("16-bit PGM (maxval {maxval}); only 8-bit is supported")));
    }
    if maxval != 255 {
        return Err(ImageError::Unsupported(format!("PGM maxval {maxval}; only 255 is supported")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let need = width
        .checked_mul(height)
        .ok_or_else(|| ImageError::Malformed(format!("PGM dimensions {width}x{height} overflow")))?;
    let raster = bytes.get(pos..).unwrap_or_default();
    if raster.len() < need {
        return Err(ImageError::Malformed(format!("truncated PGM: {} of {need} pixel bytes", raster.len())));
    }
    GrayImage::new(width, height, raster[..need].to_vec()).map_err(|e| ImageError::Malformed(e.to_string()))
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

/// `round(0.299 R + 0.587 G + 0.114 B)` in integer arithmetic.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

/// Decodes an 8-bit grayscale or 8-bit RGB PNG.
pub fn decode_png(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| ImageError::Malformed(format!("PNG: {e}")))?;
    let info = reader.info();
    if info.bit_depth != png::BitDepth::Eight {
        return Err(ImageError::Unsupported(format!("PNG bit depth {:?}; only 8-bit is supported", info.bit_depth)));
    }
    let color = info.color_type;
    if !matches!(color, png::ColorType::Grayscale | png::ColorType::Rgb) {
        return Err(ImageError::Unsupported(format!("PNG color type {color:?}; only grayscale and RGB are supported")));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImageError::Malformed("PNG dimensions overflow".into()))?;
    let mut buf = vec![0; size];
    let frame = reader.next_frame(&mut buf).map_err(|e| ImageError::Malformed(format!("PNG: {e}")))?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let channels = if color == png::ColorType::Rgb { 3 } else { 1 };
    let mut pixels = Vec::with_capacity(w * h);
    for row in buf.chunks_exact(frame.line_size).take(h) {
        let row = &row[..w * channels];
        match channels {
            1 => pixels.extend_from_slice(row),
            _ => pixels.extend(row.chunks_exact(3).map(|p| luma(p[0], p[1], p[2]))),
        }
    }
    GrayImage::new(w, h, pixels).map_err(|e| ImageError::Malformed(e.to_string()))
}

pub fn encode_png(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().expect("in-memory PNG header");
    writer.write_image_data(img.pixels()).expect("in-memory PNG data");
    writer.finish().expect("in-memory PNG trailer");
    out
}

/// Decodes by content: PNG signature or a `P` magic.
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.first() == Some(&b'P') {
        decode_pgm(bytes)
    } else {
        Err(ImageError::Unsupported("not a PNG or PGM file".into()))
    }
}

pub fn load_image(path: &Path) -> Result<GrayImage, ImageError> {
    let bytes = fs::read(path).map_err(|source| ImageError::Io { path: path.display().to_string(), source })?;
    decode_image(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_payload_is_taken_verbatim() {
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 17, 34]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.pixels(), &[0, 255, 17, 34]);
    }

    #[test]
    fn pgm_header_comments_and_whitespace() {
        let mut bytes = b"P5 # comment\n# another\n 3\t1 255\n".to_vec();
        bytes.extend_from_slice(&[9, 8, 7]);
        assert_eq!(decode_pgm(&bytes).unwrap().pixels(), &[9, 8, 7]);
    }

    #[test]
    fn pgm_rejections() {
        assert!(matches!(decode_pgm(b"P5\n2 2\n65535\n\0\0\0\0\0\0\0\0"), Err(ImageError::Unsupported(_))));
        assert!(matches!(decode_pgm(b"P2\n1 1\n255\n0"), Err(ImageError::Unsupported(_))));
        assert!(matches!(decode_pgm(b"P5\n2 2\n255\n\0\0"), Err(ImageError::Malformed(_))));
        assert!(matches!(decode_pgm(b"P5\n2"), Err(ImageError::Malformed(_))));
    }

    #[test]
    fn luma_rule() {
        assert_eq!(luma(255, 255, 255), 255);
        assert_eq!(luma(255, 0, 0), 76);
        assert_eq!(luma(0, 255, 0), 150);
        assert_eq!(luma(0, 0, 255), 29);
        // 0.299·10 + 0.587·20 + 0.114·30 = 18.15
        assert_eq!(luma(10, 20, 30), 18);
    }

    #[test]
    fn png_and_pgm_agree() {
        let img = GrayImage::new(5, 3, (0..15).map(|v| v * 17).collect()).unwrap();
        assert_eq!(decode_image(&encode_png(&img)).unwrap(), img);
        assert_eq!(decode_image(&encode_pgm(&img)).unwrap(), img);
    }

    #[test]
    fn rgb_png_uses_luma() {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, 2, 1);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[255, 0, 0, 10, 20, 30]).unwrap();
        w.finish().unwrap();
        assert_eq!(decode_png(&out).unwrap().pixels(), &[76, 18]);
    }

    #[test]
    fn sixteen_bit_png_is_rejected() {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, 1, 1);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[1, 2]).unwrap();
        w.finish().unwrap();
        assert!(matches!(decode_png(&out), Err(ImageError::Unsupported(_))));
        assert!(matches!(decode_image(b"GIF89a"), Err(ImageError::Unsupported(_))));
    }
}
