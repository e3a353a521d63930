//! File formats, dataset directories and the command line for the
//! `cxrnet-core` chest X-ray classifier.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod image_io;
pub mod persist;

pub use error::AppError;
