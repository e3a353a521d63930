use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{missing_context, Mode, Rng};
use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Inverted dropout: in train mode each element is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`; eval mode is identity.
#[derive(Debug, Clone)]
pub struct Dropout<T> {
    pub name: String,
    rate: f64,
    /// Per-element multiplier (0 or 1/(1-rate)); `None` after an eval pass.
    mask: Option<Option<Vec<T>>>,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(name: impl Into<String>, rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(alloc::format!("dropout rate must be in [0, 1), got {rate}")));
        }
        Ok(Dropout { name: name.into(), rate, mask: None })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.clone())
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut Rng) -> Result<Tensor<T>> {
        if mode == Mode::Eval || self.rate == 0.0 {
            self.mask = Some(None);
            return Ok(x.clone());
        }
        let keep = T::from_f64(1.0 / (1.0 - self.rate));
        let mask: Vec<T> = (0..x.len())
            .map(|_| if rng.random::<f64>() < self.rate { T::zero() } else { keep })
            .collect();
        let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        self.mask = Some(Some(mask));
        Tensor::new(x.dims(), data)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        match self.mask.as_ref().ok_or_else(|| missing_context(&self.name))? {
            None => Ok(grad_out.clone()),
            Some(mask) => {
                if mask.len() != grad_out.len() {
                    return Err(shape_err!("{}: gradient {:?} does not match mask", self.name, grad_out.shape()));
                }
                let data = grad_out.data().iter().zip(mask).map(|(&g, &m)| g * m).collect();
                Tensor::new(grad_out.dims(), data)
            }
        }
    }

    pub(crate) fn clear_cache(&mut self) {
        self.mask = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rate_zero_and_eval_are_identity() {
        let mut rng = Rng::seed_from_u64(1);
        let x = Tensor::from_slice(&[4], &[1.0f64, -2.0, 3.0, 4.0]).unwrap();
        let mut d0 = Dropout::new("d", 0.0).unwrap();
        assert_eq!(d0.forward(&x, Mode::Train, &mut rng).unwrap(), x);
        let mut d = Dropout::new("d", 0.2).unwrap();
        assert_eq!(d.forward(&x, Mode::Eval, &mut rng).unwrap(), x);
        assert_eq!(d.backward(&x).unwrap(), x);
    }

    #[test]
    fn survivors_are_scaled() {
        let mut rng = Rng::seed_from_u64(2);
        let x = Tensor::full(&[1000], 1.0f64).unwrap();
        let mut d = Dropout::new("d", 0.2).unwrap();
        let y = d.forward(&x, Mode::Train, &mut rng).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 1.25));
        let g = d.backward(&x).unwrap();
        assert_eq!(g, y);
    }

    #[test]
    fn rate_one_is_rejected() {
        assert!(matches!(Dropout::<f32>::new("d", 1.0), Err(Error::Config(_))));
        assert!(Dropout::<f32>::new("d", -0.1).is_err());
    }

    #[test]
    fn expectation_is_preserved() {
        let mut rng = Rng::seed_from_u64(7);
        let x = Tensor::full(&[1], 0.8f64).unwrap();
        let mut d = Dropout::new("d", 0.2).unwrap();
        let trials = 10_000;
        let mean: f64 = (0..trials)
            .map(|_| d.forward(&x, Mode::Train, &mut rng).unwrap().data()[0])
            .sum::<f64>()
            / trials as f64;
        assert!((mean - 0.8).abs() / 0.8 < 0.02, "mean {mean}");
    }
}
