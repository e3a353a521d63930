use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{missing_context, Mode, Param};
use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_MOMENTUM: f64 = 0.99;

/// Per-channel batch normalization over every axis except the last.
///
/// Train mode normalizes with the (biased) batch statistics and folds them
/// into the moving statistics; eval mode uses the moving statistics. The
/// moving statistics start out unset: the first train-mode batch seeds them
/// directly, later batches blend in with `momentum`.
#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub name: String,
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub moving_mean: Param<T>,
    pub moving_variance: Param<T>,
    pub epsilon: f64,
    pub momentum: f64,
    stats_ready: bool,
    cache: Option<Cache<T>>,
}

#[derive(Debug, Clone)]
struct Cache<T> {
    mode: Mode,
    xhat: Vec<T>,
    inv_std: Vec<T>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(name: impl Into<String>, channels: usize) -> Self {
        let v = |x: f64| Tensor::full(&[channels], T::from_f64(x)).expect("channels >= 1");
        BatchNorm {
            name: name.into(),
            gamma: Param::new("gamma", v(1.0), true),
            beta: Param::new("beta", v(0.0), true),
            moving_mean: Param::new("moving_mean", v(0.0), false),
            moving_variance: Param::new("moving_variance", v(0.0), false),
            epsilon: DEFAULT_EPSILON,
            momentum: DEFAULT_MOMENTUM,
            stats_ready: false,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.len()
    }

    /// Whether the moving statistics hold real values (set by a train-mode
    /// batch or by loading weights).
    pub fn stats_ready(&self) -> bool {
        self.stats_ready
    }

    pub fn mark_stats_ready(&mut self) {
        self.stats_ready = true;
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.check_channels(input)?;
        Ok(input.to_vec())
    }

    fn check_channels(&self, dims: &[usize]) -> Result<()> {
        match dims.last() {
            Some(&c) if c == self.channels() => Ok(()),
            _ => Err(shape_err!("{}: input {dims:?} for {} channels", self.name, self.channels())),
        }
    }

    fn eval_coefficients(&self) -> Result<(Vec<T>, Vec<T>)> {
        if !self.stats_ready {
            return Err(Error::State(alloc::format!(
                "{}: eval mode needs moving statistics, but none were recorded",
                self.name
            )));
        }
        let eps = T::from_f64(self.epsilon);
        let inv_std: Vec<T> = self
            .moving_variance
            .value
            .data()
            .iter()
            .map(|&v| T::one() / (v + eps).sqrt())
            .collect();
        Ok((self.moving_mean.value.data().to_vec(), inv_std))
    }

    fn batch_statistics(&self, x: &Tensor<T>) -> (Vec<T>, Vec<T>) {
        let c = self.channels();
        let count = T::from_f64((x.len() / c) as f64);
        let mut mean = vec![T::zero(); c];
        for row in x.data().chunks_exact(c) {
            mean.iter_mut().zip(row).for_each(|(m, &v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![T::zero(); c];
        for row in x.data().chunks_exact(c) {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        var.iter_mut().for_each(|s| *s /= count);
        (mean, var)
    }

    fn normalize(&self, x: &Tensor<T>, mean: &[T], inv_std: &[T]) -> (Vec<T>, Vec<T>) {
        let c = self.channels();
        let mut xhat = x.data().to_vec();
        for row in xhat.chunks_exact_mut(c) {
            for ((v, &m), &s) in row.iter_mut().zip(mean).zip(inv_std) {
                *v = (*v - m) * s;
            }
        }
        let gamma = self.gamma.value.data();
        let beta = self.beta.value.data();
        let mut y = xhat.clone();
        for row in y.chunks_exact_mut(c) {
            for ((v, &g), &b) in row.iter_mut().zip(gamma).zip(beta) {
                *v = *v * g + b;
            }
        }
        (xhat, y)
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.check_channels(x.dims())?;
        let (mean, inv_std) = match mode {
            Mode::Eval => self.eval_coefficients()?,
            Mode::Train => {
                let (mean, var) = self.batch_statistics(x);
                self.update_moving(&mean, &var);
                let eps = T::from_f64(self.epsilon);
                let inv_std = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
                (mean, inv_std)
            }
        };
        let (xhat, y) = self.normalize(x, &mean, &inv_std);
        self.cache = Some(Cache { mode, xhat, inv_std });
        Tensor::new(x.dims(), y)?.check_finite("batch normalization")
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_channels(x.dims())?;
        let (mean, inv_std) = self.eval_coefficients()?;
        let (_, y) = self.normalize(x, &mean, &inv_std);
        Tensor::new(x.dims(), y)?.check_finite("batch normalization")
    }

    fn update_moving(&mut self, mean: &[T], var: &[T]) {
        if !self.stats_ready {
            self.moving_mean.value.data_mut().copy_from_slice(mean);
            self.moving_variance.value.data_mut().copy_from_slice(var);
            self.stats_ready = true;
            return;
        }
        let m = T::from_f64(self.momentum);
        let keep = T::one() - m;
        for (mm, &b) in self.moving_mean.value.data_mut().iter_mut().zip(mean) {
            *mm = m * *mm + keep * b;
        }
        for (mv, &b) in self.moving_variance.value.data_mut().iter_mut().zip(var) {
            *mv = m * *mv + keep * b;
        }
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.as_ref().ok_or_else(|| missing_context(&self.name))?;
        if grad_out.len() != cache.xhat.len() {
            return Err(shape_err!("{}: gradient {:?} does not match cached input", self.name, grad_out.shape()));
        }
        let c = self.channels();
        let dy = grad_out.data();
        let mut dgamma = vec![T::zero(); c];
        let mut dbeta = vec![T::zero(); c];
        for (g_row, x_row) in dy.chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
            for ch in 0..c {
                dgamma[ch] += g_row[ch] * x_row[ch];
                dbeta[ch] += g_row[ch];
            }
        }
        let gamma = self.gamma.value.data();
        let mut dx = vec![T::zero(); dy.len()];
        match cache.mode {
            Mode::Eval => {
                for (d_row, g_row) in dx.chunks_exact_mut(c).zip(dy.chunks_exact(c)) {
                    for ch in 0..c {
                        d_row[ch] = g_row[ch] * gamma[ch] * cache.inv_std[ch];
                    }
                }
            }
            Mode::Train => {
                // dx = γ·inv_std/M · (M·dy − Σdy − x̂·Σ(dy·x̂))
                let count = T::from_f64((dy.len() / c) as f64);
                for ((d_row, g_row), x_row) in
                    dx.chunks_exact_mut(c).zip(dy.chunks_exact(c)).zip(cache.xhat.chunks_exact(c))
                {
                    for ch in 0..c {
                        let scale = gamma[ch] * cache.inv_std[ch] / count;
                        d_row[ch] = scale * (count * g_row[ch] - dbeta[ch] - x_row[ch] * dgamma[ch]);
                    }
                }
            }
        }
        self.gamma.grad.data_mut().copy_from_slice(&dgamma);
        self.beta.grad.data_mut().copy_from_slice(&dbeta);
        Tensor::new(grad_out.dims(), dx)
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = None;
    }
}
