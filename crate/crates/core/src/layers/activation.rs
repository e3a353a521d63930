use alloc::vec::Vec;

use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Activation fused onto the output of a convolution or dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
}

impl Activation {
    pub(crate) fn apply_in_place<T: Scalar>(self, xs: &mut [T]) {
        match self {
            Activation::Linear => {}
            Activation::Relu => xs.iter_mut().for_each(|v| *v = relu_scalar(*v)),
            Activation::Sigmoid => xs.iter_mut().for_each(|v| *v = sigmoid_scalar(*v)),
        }
    }

    /// Multiplies `grad` by the activation derivative, expressed through the
    /// activation's output.
    pub(crate) fn backprop_in_place<T: Scalar>(self, output: &[T], grad: &mut [T]) {
        match self {
            Activation::Linear => {}
            // d/dx at exactly 0 is taken as 0.
            Activation::Relu => grad.iter_mut().zip(output).for_each(|(g, &y)| {
                if y <= T::zero() {
                    *g = T::zero();
                }
            }),
            Activation::Sigmoid => grad
                .iter_mut()
                .zip(output)
                .for_each(|(g, &y)| *g *= y * (T::one() - y)),
        }
    }
}

#[inline]
pub fn relu_scalar<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

/// Logistic function, branching on sign so `exp` never overflows.
#[inline]
pub fn sigmoid_scalar<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(relu_scalar)
}

pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid_scalar)
}

/// Softmax of a rank-1 tensor, shifted by the maximum for stability.
pub fn softmax<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape().rank() != 1 {
        return Err(shape_err!("softmax expects rank 1, got {:?}", x.shape()));
    }
    let max = x.data().iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = x.data().iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    Tensor::new(x.dims(), exps.into_iter().map(|e| e / total).collect())?.check_finite("softmax")
}
