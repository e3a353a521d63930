//! Samples, labels, preprocessing and augmentation.

mod augment;
mod image;
mod synth;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

pub use augment::{augment, augment_with, preprocess, AugmentConfig, AugmentParams};
pub use image::{crop_top, cropped_rows, flip_horizontal, normalize, resize_bilinear, GrayImage};
pub use synth::{synth_dataset, synth_image};

use crate::error::{Error, Result};
use crate::layers::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Binary class; `Covid` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Covid,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Normal, Label::Covid];

    /// Directory name holding this class's images.
    pub fn dir_name(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Covid => "covid",
        }
    }

    pub fn from_dir_name(name: &str) -> Option<Label> {
        Label::ALL.into_iter().find(|l| l.dir_name() == name)
    }

    /// Training target: 1 for covid, 0 for normal.
    pub fn target(self) -> f64 {
        match self {
            Label::Normal => 0.0,
            Label::Covid => 1.0,
        }
    }

    /// Covid iff `p >= threshold`.
    pub fn from_probability(p: f64, threshold: f64) -> Label {
        if p >= threshold {
            Label::Covid
        } else {
            Label::Normal
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: GrayImage,
    pub label: Label,
    /// Where the image came from (a path, or a generator tag).
    pub source: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Dataset { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

/// Mixes `(seed, a, b)` into an independent 64-bit seed (splitmix64 rounds).
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(mix(seed) ^ a) ^ b)
}

const SPLIT_STREAM: u64 = 0x5b11_7000;

/// Stratified split: each class is shuffled with `seed` and its first
/// `round(ratio · count)` samples go to the training side. Both sides keep
/// the original sample order.
pub fn split(dataset: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(alloc::format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let mut in_train = alloc::vec![false; dataset.len()];
    for label in Label::ALL {
        let mut idx: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.samples[i].label == label).collect();
        let n = idx.len();
        let n_train = num_traits::Float::round(ratio * n as f64) as usize;
        if n_train == 0 || n_train >= n {
            return Err(Error::Data(alloc::format!(
                "split ratio {ratio} leaves an empty side for class {label} ({n} samples)"
            )));
        }
        idx.shuffle(&mut Rng::seed_from_u64(derive_seed(seed, SPLIT_STREAM, label as u64)));
        for &i in &idx[..n_train] {
            in_train[i] = true;
        }
    }
    let (train, val): (Vec<_>, Vec<_>) = dataset.samples.iter().cloned().zip(in_train).partition(|(_, t)| *t);
    Ok((
        Dataset::new(train.into_iter().map(|(s, _)| s).collect()),
        Dataset::new(val.into_iter().map(|(s, _)| s).collect()),
    ))
}

/// Stacks preprocessed `height × width` planes into an `(N, H, W, 1)` batch.
pub fn stack_planes<T: Scalar>(planes: &[Vec<f64>], width: usize, height: usize) -> Result<Tensor<T>> {
    let data = planes.iter().flat_map(|p| p.iter().map(|&v| T::from_f64(v))).collect();
    Tensor::new(&[planes.len(), height, width, 1], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn dataset(covid: usize, normal: usize) -> Dataset {
        let mk = |label, i| Sample {
            image: GrayImage::filled(2, 2, i as u8).unwrap(),
            label,
            source: format!("{label}/{i}"),
        };
        let mut samples: Vec<_> = (0..covid).map(|i| mk(Label::Covid, i)).collect();
        samples.extend((0..normal).map(|i| mk(Label::Normal, i)));
        Dataset::new(samples)
    }

    #[test]
    fn stratified_split_counts() {
        let ds = dataset(50, 50);
        let (train, val) = split(&ds, 0.8, 3).unwrap();
        assert_eq!((train.len(), val.len()), (80, 20));
        assert_eq!((train.count(Label::Covid), train.count(Label::Normal)), (40, 40));
        assert_eq!((val.count(Label::Covid), val.count(Label::Normal)), (10, 10));
        let (train2, val2) = split(&ds, 0.8, 3).unwrap();
        assert_eq!((train, val), (train2, val2));
    }

    #[test]
    fn split_is_a_partition() {
        let ds = dataset(13, 7);
        let (train, val) = split(&ds, 0.7, 11).unwrap();
        assert_eq!(train.count(Label::Covid), 9);
        assert_eq!(train.count(Label::Normal), 5);
        let mut all: Vec<_> = train.samples.iter().chain(&val.samples).map(|s| s.source.clone()).collect();
        all.sort();
        let mut want: Vec<_> = ds.samples.iter().map(|s| s.source.clone()).collect();
        want.sort();
        assert_eq!(all, want);
    }

    #[test]
    fn split_rejects_empty_side() {
        let ds = dataset(3, 10);
        assert!(matches!(split(&ds, 0.9, 0), Err(Error::Data(_))));
        assert!(matches!(split(&ds, 1.0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn labels_and_thresholds() {
        assert_eq!(Label::from_probability(0.7, 0.5), Label::Covid);
        assert_eq!(Label::from_probability(0.5, 0.5), Label::Covid);
        assert_eq!(Label::from_probability(0.2, 0.5), Label::Normal);
        assert_eq!(Label::from_dir_name("covid"), Some(Label::Covid));
        assert_eq!(Label::from_dir_name("Covid"), None);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
        assert_eq!(derive_seed(9, 2, 3), derive_seed(9, 2, 3));
    }
}
