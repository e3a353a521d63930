//! A small convolutional network engine for binary chest X-ray
//! classification.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every pure piece of the
//! pipeline: tensors, layer kernels with hand-written backward passes, the
//! fixed classifier architecture, binary cross-entropy with RMSProp training,
//! grayscale preprocessing and augmentation, and confusion-matrix metrics.
//! File formats, dataset directories and the command line live in the
//! `cxrnet` crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod scalar;
pub mod tensor;
pub mod layers;
pub mod data;
pub mod model;
pub mod weights;
pub mod metrics;
pub mod training;
pub mod gradcheck;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{Shape, Tensor};
pub use data::{Dataset, GrayImage, Label, Sample};
pub use metrics::{compute_metrics, ConfusionMatrix, MetricsReport};
pub use model::{build_proposed_model, Architecture, Model};
pub use training::{evaluate, train, TrainConfig};
