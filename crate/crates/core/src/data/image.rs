use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// 8-bit single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Data(alloc::format!("image dimensions {width}x{height} must be positive")));
        }
        if pixels.len() != width * height {
            return Err(Error::Data(alloc::format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, alloc::vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub(crate) fn to_values(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }

    /// Rebuilds an image from intensities, rounding half up and clamping to 0..=255.
    pub(crate) fn from_values(width: usize, height: usize, values: &[f64]) -> Self {
        let pixels = values.iter().map(|&v| (v + 0.5).floor().clamp(0.0, 255.0) as u8).collect();
        GrayImage { width, height, pixels }
    }
}

/// Number of rows `crop_top` removes.
pub fn cropped_rows(height: usize, fraction: f64) -> usize {
    // The small slack keeps e.g. 0.29·100 from flooring to 28.
    Float::floor(fraction * height as f64 + 1e-9) as usize
}

/// Removes the top `floor(fraction · height)` rows.
pub fn crop_top(img: &GrayImage, fraction: f64) -> Result<GrayImage> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(alloc::format!("crop fraction must be in [0, 1), got {fraction}")));
    }
    let rows = cropped_rows(img.height, fraction);
    if rows >= img.height {
        return Err(Error::Data(alloc::format!(
            "cropping {rows} of {} rows leaves an empty image",
            img.height
        )));
    }
    Ok(GrayImage {
        width: img.width,
        height: img.height - rows,
        pixels: img.pixels[rows * img.width..].to_vec(),
    })
}

/// Source coordinate and blend weight along one axis for half-pixel-centred
/// resampling, clamped to the edge pixels.
fn resize_taps(out: usize, input: usize) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / out as f64;
    (0..out)
        .map(|o| {
            let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (input - 1) as f64);
            let i0 = Float::floor(s) as usize;
            let i1 = (i0 + 1).min(input - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

pub(crate) fn resize_values(src: &[f64], w: usize, h: usize, out_w: usize, out_h: usize) -> Vec<f64> {
    if (w, h) == (out_w, out_h) {
        return src.to_vec();
    }
    let xs = resize_taps(out_w, w);
    let ys = resize_taps(out_h, h);
    let mut out = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
            let bottom = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Bilinear resize with pixel centres at half-integer coordinates.
pub fn resize_bilinear(img: &GrayImage, width: usize, height: usize) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(Error::Config(alloc::format!("resize target {width}x{height} must be positive")));
    }
    if (img.width, img.height) == (width, height) {
        return Ok(img.clone());
    }
    let v = resize_values(&img.to_values(), img.width, img.height, width, height);
    Ok(GrayImage::from_values(width, height, &v))
}

/// Intensities divided by 255, shaped `(height, width, 1)`.
pub fn normalize<T: Scalar>(img: &GrayImage) -> Tensor<T> {
    let data = img.pixels.iter().map(|&p| T::from_f64(p as f64 / 255.0)).collect();
    Tensor::new(&[img.height, img.width, 1], data).expect("image dims are positive")
}

pub fn flip_horizontal(img: &GrayImage) -> GrayImage {
    let mut pixels = img.pixels.clone();
    for row in pixels.chunks_exact_mut(img.width) {
        row.reverse();
    }
    GrayImage { width: img.width, height: img.height, pixels }
}
