//! Binary cross-entropy, RMSProp and the epoch loop.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::data::{derive_seed, preprocess, stack_planes, AugmentConfig, AugmentParams, Dataset, Label};
use crate::error::{shape_err, Error, Result};
use crate::layers::{Mode, Param, Rng};
use crate::metrics::{confusion, ConfusionMatrix};
use crate::model::{check_threshold, Model};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Probabilities are clamped to `[LOSS_CLAMP, 1 - LOSS_CLAMP]` before the log.
pub const LOSS_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 12, batch_size: 32, learning_rate: 1e-3, rho: 0.9, epsilon: 1e-7, seed: 0, threshold: 0.5 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.epochs < 1 {
            return fail(format!("epochs must be >= 1, got {}", self.epochs));
        }
        if self.batch_size < 1 {
            return fail(format!("batch_size must be >= 1, got {}", self.batch_size));
        }
        // lr = 0 is allowed: it freezes the weights, which is handy for checks.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be a non-negative number, got {}", self.learning_rate));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return fail(format!("rho must be in (0, 1), got {}", self.rho));
        }
        if !(self.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        check_threshold(self.threshold)
    }
}

fn check_targets<T: Scalar>(p: &Tensor<T>, y: &[T]) -> Result<()> {
    if p.len() != y.len() {
        return Err(shape_err!("{} predictions for {} labels", p.len(), y.len()));
    }
    if let Some(bad) = y.iter().find(|&&v| v != T::zero() && v != T::one()) {
        return Err(Error::Data(format!("label {bad} is not 0 or 1")));
    }
    Ok(())
}

/// Mean of `-[y ln p + (1 - y) ln(1 - p)]` over the batch.
pub fn bce_loss<T: Scalar>(p: &Tensor<T>, y: &[T]) -> Result<T> {
    check_targets(p, y)?;
    let lo = T::from_f64(LOSS_CLAMP);
    let hi = T::one() - lo;
    let total: T = p
        .data()
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = p.max(lo).min(hi);
            -(y * p.ln() + (T::one() - y) * (T::one() - p).ln())
        })
        .sum();
    let loss = total / T::from_f64(y.len() as f64);
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite("binary cross-entropy"))
    }
}

/// Gradient of the mean cross-entropy with respect to the pre-sigmoid
/// logits: `(p - y) / N`.
pub fn bce_sigmoid_grad<T: Scalar>(p: &Tensor<T>, y: &[T]) -> Result<Tensor<T>> {
    check_targets(p, y)?;
    let n = T::from_f64(y.len() as f64);
    let data = p.data().iter().zip(y).map(|(&p, &y)| (p - y) / n).collect();
    Tensor::new(p.dims(), data)
}

/// RMSProp: `acc ← ρ·acc + (1-ρ)·g²`, `θ ← θ - lr·g / (sqrt(acc) + ε)`.
#[derive(Debug, Clone)]
pub struct RmsProp<T> {
    pub learning_rate: f64,
    pub rho: f64,
    pub epsilon: f64,
    accumulators: Vec<Tensor<T>>,
}

impl<T: Scalar> RmsProp<T> {
    pub fn new(cfg: &TrainConfig) -> Self {
        RmsProp { learning_rate: cfg.learning_rate, rho: cfg.rho, epsilon: cfg.epsilon, accumulators: Vec::new() }
    }

    /// Per-parameter squared-gradient averages, empty before the first step.
    pub fn accumulators(&self) -> &[Tensor<T>] {
        &self.accumulators
    }

    /// Updates each parameter from its `grad`. Accumulators are created on
    /// the first call and must line up with the same parameters afterwards.
    pub fn step(&mut self, params: &mut [&mut Param<T>]) -> Result<()> {
        if self.accumulators.is_empty() {
            self.accumulators = params
                .iter()
                .map(|p| Tensor::zeros(p.value.dims()))
                .collect::<Result<_>>()?;
        }
        if self.accumulators.len() != params.len() {
            return Err(shape_err!("optimizer tracks {} tensors, got {}", self.accumulators.len(), params.len()));
        }
        let rho = T::from_f64(self.rho);
        let keep = T::one() - rho;
        let lr = T::from_f64(self.learning_rate);
        let eps = T::from_f64(self.epsilon);
        for (p, acc) in params.iter_mut().zip(&mut self.accumulators) {
            if acc.shape() != p.value.shape() || p.grad.shape() != p.value.shape() {
                return Err(shape_err!("optimizer state {:?} for parameter {:?}", acc.shape(), p.value.shape()));
            }
            for ((v, &g), a) in p.value.data_mut().iter_mut().zip(p.grad.data()).zip(acc.data_mut()) {
                *a = rho * *a + keep * g * g;
                *v -= lr * g / (a.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// One row of the training history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

/// History as CSV with full-precision values.
pub fn history_csv(records: &[EpochRecord]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!("{},{:?},{:?},{:?},{:?}\n", r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub probabilities: Vec<f64>,
}

fn batch_for<T: Scalar>(
    dataset: &Dataset,
    indices: &[usize],
    aug: &AugmentConfig,
    params: impl Fn(usize) -> Option<AugmentParams>,
) -> Result<(Tensor<T>, Vec<T>)> {
    let [w, h] = aug.target_size;
    let planes = indices
        .iter()
        .map(|&i| preprocess(&dataset.samples[i].image, aug, params(i).as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let labels = indices.iter().map(|&i| T::from_f64(dataset.samples[i].label.target())).collect();
    Ok((stack_planes(&planes, w, h)?, labels))
}

/// Eval-mode loss, accuracy and confusion counts; never touches parameters.
pub fn evaluate<T: Scalar>(model: &Model<T>, dataset: &Dataset, cfg: &TrainConfig, aug: &AugmentConfig) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::Data("cannot evaluate an empty dataset".into()));
    }
    check_threshold(cfg.threshold)?;
    let order: Vec<usize> = (0..dataset.len()).collect();
    let mut probabilities = Vec::with_capacity(dataset.len());
    let mut loss_sum = 0.0;
    for chunk in order.chunks(cfg.batch_size.max(1)) {
        let (x, y) = batch_for::<T>(dataset, chunk, aug, |_| None)?;
        let p = model.infer(&x)?;
        loss_sum += bce_loss(&p, &y)?.as_f64() * chunk.len() as f64;
        probabilities.extend(p.data().iter().map(|v| v.as_f64()));
    }
    let pred: Vec<Label> = probabilities.iter().map(|&p| Label::from_probability(p, cfg.threshold)).collect();
    let cm = confusion(&pred, &dataset.labels())?;
    Ok(Evaluation {
        loss: loss_sum / dataset.len() as f64,
        accuracy: (cm.tp + cm.tn) as f64 / cm.total() as f64,
        confusion: cm,
        probabilities,
    })
}

/// Train-mode forward, fused sigmoid/cross-entropy backward and one
/// optimizer update. Returns the batch loss before the update.
pub fn train_step<T: Scalar>(model: &mut Model<T>, optimizer: &mut RmsProp<T>, x: &Tensor<T>, y: &[T]) -> Result<T> {
    let p = model.forward(x, Mode::Train)?;
    let loss = bce_loss(&p, y)?;
    let grad = bce_sigmoid_grad(&p, y)?;
    model.backward_from_logits(&grad)?;
    optimizer.step(&mut model.trainable_params_mut())?;
    Ok(loss)
}

const SHUFFLE_STREAM: u64 = 0x5_4ff1e;
const DROPOUT_STREAM: u64 = 0xd_0d0;

/// Augmentation generator for one sample in one epoch; independent of batch
/// order and of how many samples were drawn before it.
pub fn sample_rng(aug_seed: u64, epoch: usize, sample_index: usize) -> Rng {
    Rng::seed_from_u64(derive_seed(aug_seed, epoch as u64, sample_index as u64))
}

/// Runs `cfg.epochs` epochs of shuffled mini-batch training, evaluating both
/// sets in eval mode after each epoch. `on_epoch` sees each record as it is
/// produced. The result depends only on the model, data and configs.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    aug: &AugmentConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    aug.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Data("training and validation sets must be non-empty".into()));
    }
    for label in Label::ALL {
        if train_set.count(label) == 0 {
            return Err(Error::Data(format!("training set has no {label} samples")));
        }
    }
    let [w, h] = aug.target_size;
    model.reseed(derive_seed(cfg.seed, DROPOUT_STREAM, 0));
    let mut optimizer = RmsProp::new(cfg);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut Rng::seed_from_u64(derive_seed(cfg.seed, SHUFFLE_STREAM, epoch as u64)));
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = batch_for::<T>(train_set, chunk, aug, |i| {
                aug.enabled.then(|| AugmentParams::sample(aug, w, h, &mut sample_rng(aug.seed, epoch, i)))
            })?;
            train_step(model, &mut optimizer, &x, &y)?;
        }
        model.clear_caches();
        let tr = evaluate(model, train_set, cfg, aug)?;
        let va = evaluate(model, val_set, cfg, aug)?;
        let record = EpochRecord {
            epoch,
            train_loss: tr.loss,
            train_acc: tr.accuracy,
            val_loss: va.loss,
            val_acc: va.accuracy,
        };
        on_epoch(&record);
        history.push(record);
    }
    Ok(history)
}
