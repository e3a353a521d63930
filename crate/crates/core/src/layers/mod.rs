//! Forward and backward kernels for the layer types of the network.
//!
//! Every layer caches what its backward pass needs during a `forward` call;
//! `infer` is the cache-free eval-mode path usable through `&self`.

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod dropout;
mod flatten;
mod pool;

use alloc::vec::Vec;

pub use activation::{relu, relu_scalar, sigmoid, sigmoid_scalar, softmax, Activation};
pub use batchnorm::BatchNorm;
pub use conv::Conv2d;
pub use dense::Dense;
pub use dropout::Dropout;
pub use flatten::Flatten;
pub use pool::{pooled_extent, MaxPool2d};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Random generator used for initialization, dropout masks and augmentation.
pub type Rng = rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A named parameter tensor together with its gradient buffer.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: &'static str,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub trainable: bool,
}

impl<T: Scalar> Param<T> {
    pub(crate) fn new(name: &'static str, value: Tensor<T>, trainable: bool) -> Self {
        let grad = Tensor::from_parts(value.shape().clone(), alloc::vec![T::zero(); value.len()]);
        Param { name, value, grad, trainable }
    }

    pub(crate) fn zero_grad(&mut self) {
        self.grad.data_mut().iter_mut().for_each(|g| *g = T::zero());
    }
}

/// One layer of a sequential network.
#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv2d(Conv2d<T>),
    BatchNorm(BatchNorm<T>),
    MaxPool2d(MaxPool2d),
    Dropout(Dropout<T>),
    Flatten(Flatten),
    Dense(Dense<T>),
}

macro_rules! dispatch {
    ($self:expr, $l:ident => $body:expr) => {
        match $self {
            Layer::Conv2d($l) => $body,
            Layer::BatchNorm($l) => $body,
            Layer::MaxPool2d($l) => $body,
            Layer::Dropout($l) => $body,
            Layer::Flatten($l) => $body,
            Layer::Dense($l) => $body,
        }
    };
}

impl<T: Scalar> Layer<T> {
    pub fn name(&self) -> &str {
        dispatch!(self, l => &l.name)
    }

    /// Type label as printed in the model summary.
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv2d(_) => "Conv2D",
            Layer::BatchNorm(_) => "BatchNormalization",
            Layer::MaxPool2d(_) => "MaxPooling2D",
            Layer::Dropout(_) => "Dropout",
            Layer::Flatten(_) => "Flatten",
            Layer::Dense(_) => "Dense",
        }
    }

    /// Output shape for a per-sample input shape (batch axis excluded).
    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        dispatch!(self, l => l.output_dims(input))
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        match self {
            Layer::Conv2d(l) => alloc::vec![&l.kernel, &l.bias],
            Layer::BatchNorm(l) => alloc::vec![&l.gamma, &l.beta, &l.moving_mean, &l.moving_variance],
            Layer::Dense(l) => alloc::vec![&l.weights, &l.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        match self {
            Layer::Conv2d(l) => alloc::vec![&mut l.kernel, &mut l.bias],
            Layer::BatchNorm(l) => {
                alloc::vec![&mut l.gamma, &mut l.beta, &mut l.moving_mean, &mut l.moving_variance]
            }
            Layer::Dense(l) => alloc::vec![&mut l.weights, &mut l.bias],
            _ => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    pub fn trainable_param_count(&self) -> usize {
        self.params().iter().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }

    /// Forward pass that caches the context for [`Layer::backward`].
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut Rng) -> Result<Tensor<T>> {
        match self {
            Layer::Dropout(l) => l.forward(x, mode, rng),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Conv2d(l) => l.forward(x),
            Layer::MaxPool2d(l) => l.forward(x),
            Layer::Flatten(l) => l.forward(x),
            Layer::Dense(l) => l.forward(x),
        }
    }

    /// Eval-mode forward pass without side effects.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        dispatch!(self, l => l.infer(x))
    }

    /// Returns the gradient with respect to the cached input and stores
    /// parameter gradients in each [`Param::grad`].
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        dispatch!(self, l => l.backward(grad_out))
    }

    pub(crate) fn clear_cache(&mut self) {
        dispatch!(self, l => l.clear_cache())
    }
}

pub(crate) fn missing_context(layer: &str) -> crate::Error {
    crate::Error::State(alloc::format!("{layer}: backward called without a cached forward pass"))
}

pub(crate) fn expect_rank(x: &[usize], rank: usize, layer: &str) -> Result<()> {
    if x.len() != rank {
        return Err(crate::error::shape_err!("{layer}: expected rank {rank} input, got {x:?}"));
    }
    Ok(())
}

