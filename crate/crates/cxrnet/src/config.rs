//! Run configuration: defaults, then a JSON file, then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use cxrnet_core::data::AugmentConfig;
use cxrnet_core::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

pub const DEFAULT_SPLIT: f64 = 0.8;
pub const DEFAULT_OUT: &str = "cxrnet-run";

/// Config file contents; every field is optional and nested sections may
/// be partial.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub split: Option<f64>,
    pub precision: Option<Precision>,
    pub train: Option<TrainConfig>,
    pub augment: Option<AugmentConfig>,
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub split: Option<f64>,
    pub precision: Option<Precision>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    /// Sets both the training and the augmentation seed.
    pub seed: Option<u64>,
}

/// Fully merged configuration, written as `config.resolved.json`. The file
/// reads back as a [`RunConfig`] that reproduces the same run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub split: f64,
    pub precision: Precision,
    pub train: TrainConfig,
    pub augment: AugmentConfig,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, AppError> {
        let text = fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| AppError::Config(format!("config {}: {e}", path.display())))
    }

    pub fn resolve(self, flags: &Overrides) -> Result<ResolvedConfig, AppError> {
        let mut train = self.train.unwrap_or_default();
        let mut augment = self.augment.unwrap_or_default();
        if let Some(v) = flags.epochs {
            train.epochs = v;
        }
        if let Some(v) = flags.batch_size {
            train.batch_size = v;
        }
        if let Some(v) = flags.learning_rate {
            train.learning_rate = v;
        }
        if let Some(v) = flags.seed {
            train.seed = v;
            augment.seed = v;
        }
        let data = flags
            .data
            .clone()
            .or(self.data)
            .ok_or_else(|| AppError::Config("no dataset given: pass --data or set \"data\" in the config".into()))?;
        let resolved = ResolvedConfig {
            data,
            out: flags.out.clone().or(self.out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            split: flags.split.or(self.split).unwrap_or(DEFAULT_SPLIT),
            precision: flags.precision.or(self.precision).unwrap_or_default(),
            train,
            augment,
        };
        resolved.validate()?;
        Ok(resolved)
    }
}

impl ResolvedConfig {
    pub fn validate(&self) -> Result<(), AppError> {
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(AppError::Config(format!("split must be in (0, 1), got {}", self.split)));
        }
        self.train.validate()?;
        self.augment.validate()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}
