//! Central-difference gradient checks in 64-bit precision.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng as _, SeedableRng};

use crate::error::Result;
use crate::layers::{Layer, Mode, Rng};
use crate::model::Model;
use crate::tensor::Tensor;
use crate::training::{bce_loss, bce_sigmoid_grad};

pub const DEFAULT_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared on an absolute scale.
pub const MAGNITUDE_FLOOR: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, MAGNITUDE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub max_abs_error: f64,
    pub coordinates: usize,
    /// Coordinate with the largest relative error, e.g. `"kernel[17]"`.
    pub worst: String,
}

impl GradCheckReport {
    fn record(&mut self, what: &str, index: usize, analytic: f64, numeric: f64) {
        let rel = relative_error(analytic, numeric);
        self.coordinates += 1;
        self.max_abs_error = self.max_abs_error.max((analytic - numeric).abs());
        if rel > self.max_relative_error || self.worst.is_empty() {
            self.max_relative_error = rel;
            self.worst = format!("{what}[{index}] analytic {analytic:e} numeric {numeric:e}");
        }
    }
}

fn random_like(dims: &[usize], rng: &mut Rng) -> Result<Tensor<f64>> {
    let n = dims.iter().product();
    Tensor::new(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Checks one layer's input and trainable-parameter gradients against
/// central differences of `L = Σ R ⊙ layer(x)` for a fixed random `R`.
/// The layer's generator is reset to `seed` before every forward pass so
/// dropout masks stay fixed.
pub fn check_layer(layer: &mut Layer<f64>, input: &Tensor<f64>, mode: Mode, seed: u64, step: f64) -> Result<GradCheckReport> {
    let eval = |layer: &mut Layer<f64>, x: &Tensor<f64>| layer.forward(x, mode, &mut Rng::seed_from_u64(seed));
    let out = eval(layer, input)?;
    let r = random_like(out.dims(), &mut Rng::seed_from_u64(seed ^ 0x9a9a))?;
    let grad_in = layer.backward(&r)?;
    let param_grads: Vec<(&'static str, Vec<f64>)> = layer
        .params()
        .into_iter()
        .filter(|p| p.trainable)
        .map(|p| (p.name, p.grad.data().to_vec()))
        .collect();

    let mut report = GradCheckReport::default();
    let mut x = input.clone();
    for i in 0..x.len() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + step;
        let plus = dot(&eval(layer, &x)?, &r);
        x.data_mut()[i] = orig - step;
        let minus = dot(&eval(layer, &x)?, &r);
        x.data_mut()[i] = orig;
        report.record("input", i, grad_in.data()[i], (plus - minus) / (2.0 * step));
    }
    for (k, (name, analytic)) in param_grads.iter().enumerate() {
        for (i, &a) in analytic.iter().enumerate() {
            let nudge = |layer: &mut Layer<f64>, delta: f64| {
                let p = layer.params_mut().into_iter().filter(|p| p.trainable).nth(k).expect("param");
                p.value.data_mut()[i] += delta;
            };
            nudge(layer, step);
            let plus = dot(&eval(layer, input)?, &r);
            nudge(layer, -2.0 * step);
            let minus = dot(&eval(layer, input)?, &r);
            nudge(layer, step);
            report.record(name, i, a, (plus - minus) / (2.0 * step));
        }
    }
    Ok(report)
}

/// Checks the fused sigmoid/cross-entropy gradient `(p - y) / N` against
/// central differences of the mean loss with respect to the logits.
pub fn check_bce_head(logits: &[f64], labels: &[f64], step: f64) -> Result<GradCheckReport> {
    let loss = |z: &[f64]| -> Result<f64> {
        let p = Tensor::new(&[z.len(), 1], z.iter().map(|&v| crate::layers::sigmoid_scalar(v)).collect())?;
        bce_loss(&p, labels)
    };
    let p = Tensor::new(&[logits.len(), 1], logits.iter().map(|&v| crate::layers::sigmoid_scalar(v)).collect())?;
    let analytic = bce_sigmoid_grad(&p, labels)?;
    let mut report = GradCheckReport::default();
    let mut z = logits.to_vec();
    for i in 0..z.len() {
        let orig = z[i];
        z[i] = orig + step;
        let plus = loss(&z)?;
        z[i] = orig - step;
        let minus = loss(&z)?;
        z[i] = orig;
        report.record("logit", i, analytic.data()[i], (plus - minus) / (2.0 * step));
    }
    Ok(report)
}

/// End-to-end check of every trainable parameter of `model` under the
/// train-mode cross-entropy loss on one batch. Dropout masks are held fixed
/// by reseeding the model before each forward pass.
pub fn check_model(model: &mut Model<f64>, batch: &Tensor<f64>, labels: &[f64], seed: u64, step: f64) -> Result<GradCheckReport> {
    let loss = |model: &mut Model<f64>| -> Result<f64> {
        model.reseed(seed);
        let p = model.forward(batch, Mode::Train)?;
        bce_loss(&p, labels)
    };
    model.reseed(seed);
    let p = model.forward(batch, Mode::Train)?;
    model.backward_from_logits(&bce_sigmoid_grad(&p, labels)?)?;
    let analytic: Vec<(String, Vec<f64>)> = model
        .named_params()
        .into_iter()
        .filter(|(_, p)| p.trainable)
        .map(|(n, p)| (n, p.grad.data().to_vec()))
        .collect();

    let mut report = GradCheckReport::default();
    for (k, (name, grads)) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let nudge = |model: &mut Model<f64>, delta: f64| {
                model.trainable_params_mut()[k].value.data_mut()[i] += delta;
            };
            nudge(model, step);
            let plus = loss(model)?;
            nudge(model, -2.0 * step);
            let minus = loss(model)?;
            nudge(model, step);
            report.record(name, i, a, (plus - minus) / (2.0 * step));
        }
    }
    model.clear_caches();
    Ok(report)
}
