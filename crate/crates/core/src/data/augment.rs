use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::image::{crop_top, resize_values, GrayImage};
use crate::error::{Error, Result};
use crate::layers::Rng;

/// Preprocessing geometry and augmentation ranges.
///
/// Each range is symmetric: rotation in `[-rotation_degrees, +rotation_degrees]`,
/// zoom in `[1 - zoom_fraction, 1 + zoom_fraction]`, shifts in
/// `±fraction · extent`. Flips happen with probability one half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Apply random transforms to training samples at all.
    pub enabled: bool,
    pub rotation_degrees: f64,
    pub zoom_fraction: f64,
    pub width_shift_fraction: f64,
    pub height_shift_fraction: f64,
    pub horizontal_flip: bool,
    pub crop_top_fraction: f64,
    /// `[width, height]` after resizing.
    pub target_size: [usize; 2],
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            enabled: true,
            rotation_degrees: 30.0,
            zoom_fraction: 0.2,
            width_shift_fraction: 0.1,
            height_shift_fraction: 0.1,
            horizontal_flip: true,
            crop_top_fraction: 0.08,
            target_size: [150, 150],
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let fraction = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(alloc::format!("{name} must be in [0, 1), got {v}")))
            }
        };
        fraction("zoom_fraction", self.zoom_fraction)?;
        fraction("width_shift_fraction", self.width_shift_fraction)?;
        fraction("height_shift_fraction", self.height_shift_fraction)?;
        fraction("crop_top_fraction", self.crop_top_fraction)?;
        if !(0.0..180.0).contains(&self.rotation_degrees) {
            return Err(Error::Config(alloc::format!(
                "rotation_degrees must be in [0, 180), got {}",
                self.rotation_degrees
            )));
        }
        if self.target_size.contains(&0) {
            return Err(Error::Config("target_size must be positive".into()));
        }
        Ok(())
    }
}

/// One sampled augmentation: shifts are in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub angle_degrees: f64,
    pub zoom: f64,
    pub dx: f64,
    pub dy: f64,
    pub flip: bool,
}

impl AugmentParams {
    pub const IDENTITY: AugmentParams = AugmentParams { angle_degrees: 0.0, zoom: 1.0, dx: 0.0, dy: 0.0, flip: false };

    /// Draws parameters for a `width × height` image. Always consumes the
    /// same number of values from `rng`, whatever the configuration.
    pub fn sample(cfg: &AugmentConfig, width: usize, height: usize, rng: &mut Rng) -> Self {
        let sym = |rng: &mut Rng, r: f64| rng.random_range(-r..=r);
        let angle_degrees = sym(rng, cfg.rotation_degrees);
        let zoom = 1.0 + sym(rng, cfg.zoom_fraction);
        let dx = sym(rng, cfg.width_shift_fraction) * width as f64;
        let dy = sym(rng, cfg.height_shift_fraction) * height as f64;
        let flip = rng.random::<f64>() < 0.5 && cfg.horizontal_flip;
        AugmentParams { angle_degrees, zoom, dx, dy, flip }
    }
}

/// Resamples a `w × h` plane under the affine map
/// `dst = shift + rotate(zoom · flip(src))` about the image centre.
/// Each destination pixel pulls from the inverse-mapped source position with
/// bilinear weights; samples outside the image read as 0.
pub(crate) fn warp_values(src: &[f64], w: usize, h: usize, p: &AugmentParams) -> Vec<f64> {
    let theta = p.angle_degrees * core::f64::consts::PI / 180.0;
    let (sin, cos) = Float::sin_cos(theta);
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let pixel = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            src[y as usize * w + x as usize]
        }
    };
    let mut out = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            let u = i as f64 + 0.5 - cx - p.dx;
            let v = j as f64 + 0.5 - cy - p.dy;
            let mut su = (cos * u + sin * v) / p.zoom;
            let sv = (cos * v - sin * u) / p.zoom;
            if p.flip {
                su = -su;
            }
            let sx = su + cx - 0.5;
            let sy = sv + cy - 0.5;
            let (x0, y0) = (Float::floor(sx), Float::floor(sy));
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let top = pixel(x0, y0) * (1.0 - fx) + pixel(x0 + 1, y0) * fx;
            let bottom = pixel(x0, y0 + 1) * (1.0 - fx) + pixel(x0 + 1, y0 + 1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Applies explicit augmentation parameters to an image.
pub fn augment_with(img: &GrayImage, p: &AugmentParams) -> GrayImage {
    let v = warp_values(&img.to_values(), img.width(), img.height(), p);
    GrayImage::from_values(img.width(), img.height(), &v)
}

/// Samples parameters from `rng` and applies them.
pub fn augment(img: &GrayImage, cfg: &AugmentConfig, rng: &mut Rng) -> (GrayImage, AugmentParams) {
    let p = AugmentParams::sample(cfg, img.width(), img.height(), rng);
    (augment_with(img, &p), p)
}

/// The per-sample input pipeline: crop → resize → normalize → augment.
///
/// Returns `height × width` intensities in `[0, 1]`. Augmentation runs on the
/// normalized plane so no 8-bit rounding happens after resizing.
pub fn preprocess(img: &GrayImage, cfg: &AugmentConfig, aug: Option<&AugmentParams>) -> Result<Vec<f64>> {
    let cropped = crop_top(img, cfg.crop_top_fraction)?;
    let [w, h] = cfg.target_size;
    let resized = resize_values(&cropped.to_values(), cropped.width(), cropped.height(), w, h);
    let normalized: Vec<f64> = resized.iter().map(|v| v / 255.0).collect();
    Ok(match aug {
        Some(p) => warp_values(&normalized, w, h, p),
        None => normalized,
    })
}
