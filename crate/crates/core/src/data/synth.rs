//! Seeded two-class fixture: soft blobs (covid) against periodic stripes
//! (normal), both over a vertical gradient with pixel noise.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;
use rand::{Rng as _, SeedableRng};

use super::{derive_seed, Dataset, GrayImage, Label, Sample};
use crate::layers::Rng;

pub fn synth_image(label: Label, width: usize, height: usize, rng: &mut Rng) -> GrayImage {
    let (w, h) = (width as f64, height as f64);
    let mut plane: Vec<f64> = (0..width * height)
        .map(|i| 60.0 + 40.0 * ((i / width) as f64 + 0.5) / h)
        .collect();
    match label {
        Label::Normal => {
            let period = rng.random_range(10.0..25.0) * w.min(h) / 150.0;
            let (sin, cos) = Float::sin_cos(rng.random_range(0.0..core::f64::consts::PI));
            let phase = rng.random_range(0.0..core::f64::consts::TAU);
            for (i, v) in plane.iter_mut().enumerate() {
                let (x, y) = ((i % width) as f64, (i / width) as f64);
                let t = core::f64::consts::TAU * (x * cos + y * sin) / period + phase;
                *v += 70.0 * (0.5 + 0.5 * Float::sin(t));
            }
        }
        Label::Covid => {
            let count = rng.random_range(3..=6);
            for _ in 0..count {
                let cx = rng.random_range(0.1..0.9) * w;
                let cy = rng.random_range(0.1..0.9) * h;
                let sigma = rng.random_range(6.0..14.0) * w.min(h) / 150.0;
                let amp = rng.random_range(90.0..130.0);
                for (i, v) in plane.iter_mut().enumerate() {
                    let (dx, dy) = ((i % width) as f64 - cx, (i / width) as f64 - cy);
                    *v += amp * Float::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                }
            }
        }
    }
    let pixels = plane
        .into_iter()
        .map(|v| Float::floor(v + rng.random_range(-10.0..10.0) + 0.5).clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(width, height, pixels).expect("positive dims")
}

/// `per_class` images of each class, covid first. Sample `i` of a class is a
/// function of `(seed, class, i)` only.
pub fn synth_dataset(per_class: usize, width: usize, height: usize, seed: u64) -> Dataset {
    let mut samples = Vec::with_capacity(2 * per_class);
    for label in [Label::Covid, Label::Normal] {
        for i in 0..per_class {
            let mut rng = Rng::seed_from_u64(derive_seed(seed, label as u64, i as u64));
            samples.push(Sample {
                image: synth_image(label, width, height, &mut rng),
                label,
                source: format!("synth/{label}/{i:05}"),
            });
        }
    }
    Dataset::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_and_balanced() {
        let a = synth_dataset(3, 20, 16, 7);
        assert_eq!(a, synth_dataset(3, 20, 16, 7));
        assert_ne!(a, synth_dataset(3, 20, 16, 8));
        assert_eq!((a.count(Label::Covid), a.count(Label::Normal)), (3, 3));
        assert_eq!(a.samples[0].image.width(), 20);
        assert_eq!(a.samples[0].source, "synth/covid/00000");
    }
}
