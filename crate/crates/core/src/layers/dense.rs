use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng as _;

use super::{expect_rank, missing_context, Activation, Param, Rng};
use crate::error::{shape_err, Result};
use crate::scalar::{gemm, Op, Scalar};
use crate::tensor::Tensor;

/// Fully connected layer `y = act(x·W + b)` with `W` stored `(in, out)`.
#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub name: String,
    pub weights: Param<T>,
    pub bias: Param<T>,
    pub activation: Activation,
    cache: Option<Cache<T>>,
}

#[derive(Debug, Clone)]
struct Cache<T> {
    input: Tensor<T>,
    output: Tensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(
        name: impl Into<String>,
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        let limit = Float::sqrt(6.0 / inputs as f64);
        let data = (0..inputs * outputs)
            .map(|_| T::from_f64(rng.random_range(-limit..limit)))
            .collect();
        Self::from_params(name, Tensor::new(&[inputs, outputs], data)?, Tensor::zeros(&[outputs])?, activation)
    }

    pub fn from_params(
        name: impl Into<String>,
        weights: Tensor<T>,
        bias: Tensor<T>,
        activation: Activation,
    ) -> Result<Self> {
        let &[_, out] = weights.dims() else {
            return Err(shape_err!("dense weights must be rank 2, got {:?}", weights.shape()));
        };
        if bias.dims() != [out] {
            return Err(shape_err!("dense bias {:?} for {out} outputs", bias.shape()));
        }
        Ok(Dense {
            name: name.into(),
            weights: Param::new("kernel", weights, true),
            bias: Param::new("bias", bias, true),
            activation,
            cache: None,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weights.value.dims()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weights.value.dims()[1]
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input != [self.inputs()] {
            return Err(shape_err!("{}: input {input:?}, expected [{}]", self.name, self.inputs()));
        }
        Ok(vec![self.outputs()])
    }

    fn compute(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        expect_rank(x.dims(), 2, &self.name)?;
        self.output_dims(&x.dims()[1..])?;
        let n = x.dims()[0];
        let (i, o) = (self.inputs(), self.outputs());
        let mut out = vec![T::zero(); n * o];
        gemm(Op::N, Op::N, n, i, o, x.data(), self.weights.value.data(), T::zero(), &mut out);
        for row in out.chunks_exact_mut(o) {
            row.iter_mut().zip(self.bias.value.data()).for_each(|(v, &b)| *v += b);
        }
        self.activation.apply_in_place(&mut out);
        Tensor::new(&[n, o], out)?.check_finite("dense")
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.compute(x)?;
        self.cache = Some(Cache { input: x.clone(), output: y.clone() });
        Ok(y)
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.compute(x)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.as_ref().ok_or_else(|| missing_context(&self.name))?;
        let mut grad = grad_out.data().to_vec();
        if grad_out.shape() != cache.output.shape() {
            return Err(shape_err!("{}: gradient {:?} for output {:?}", self.name, grad_out.shape(), cache.output.shape()));
        }
        self.activation.backprop_in_place(cache.output.data(), &mut grad);
        self.backward_linear_impl(grad)
    }

    /// Backward pass given the gradient with respect to the pre-activation
    /// output, skipping the activation derivative. Used for the fused
    /// sigmoid + cross-entropy head.
    pub fn backward_pre_activation(&mut self, grad_pre: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.as_ref().ok_or_else(|| missing_context(&self.name))?;
        if grad_pre.shape() != cache.output.shape() {
            return Err(shape_err!("{}: gradient {:?} for output {:?}", self.name, grad_pre.shape(), cache.output.shape()));
        }
        self.backward_linear_impl(grad_pre.data().to_vec())
    }

    fn backward_linear_impl(&mut self, grad: Vec<T>) -> Result<Tensor<T>> {
        let cache = self.cache.as_ref().ok_or_else(|| missing_context(&self.name))?;
        let n = cache.input.dims()[0];
        let (i, o) = (self.inputs(), self.outputs());
        // dW = xᵀ·dZ, db = Σ_rows dZ, dx = dZ·Wᵀ
        gemm(Op::T, Op::N, i, n, o, cache.input.data(), &grad, T::zero(), self.weights.grad.data_mut());
        self.bias.zero_grad();
        for row in grad.chunks_exact(o) {
            self.bias.grad.data_mut().iter_mut().zip(row).for_each(|(g, &v)| *g += v);
        }
        let mut dx = vec![T::zero(); n * i];
        gemm(Op::N, Op::T, n, o, i, &grad, self.weights.value.data(), T::zero(), &mut dx);
        Tensor::new(&[n, i], dx)
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn dense(w: &[f64], dims: [usize; 2], b: &[f64]) -> Dense<f64> {
        Dense::from_params(
            "d",
            Tensor::from_slice(&dims, w).unwrap(),
            Tensor::from_slice(&[b.len()], b).unwrap(),
            Activation::Linear,
        )
        .unwrap()
    }

    #[test]
    fn identity_weights_pass_through() {
        let mut d = dense(&[1.0, 0.0, 0.0, 1.0], [2, 2], &[0.0, 0.0]);
        let x = Tensor::from_slice(&[1, 2], &[3.0, -4.0]).unwrap();
        assert_eq!(d.forward(&x).unwrap(), x);
        let g = Tensor::from_slice(&[1, 2], &[0.5, 2.0]).unwrap();
        assert_eq!(d.backward(&g).unwrap(), g);
    }

    #[test]
    fn hand_computed_output() {
        let d = dense(&[1.0, 1.0], [2, 1], &[0.5]);
        let x = Tensor::from_slice(&[1, 2], &[1.0, 2.0]).unwrap();
        assert_eq!(d.infer(&x).unwrap().data(), &[3.5]);
    }

    #[test]
    fn table_parameter_counts() {
        let mut rng = Rng::seed_from_u64(0);
        let d = super::super::Layer::Dense(Dense::<f32>::new("d", 6400, 128, Activation::Relu, &mut rng).unwrap());
        assert_eq!(d.param_count(), 819_328);
        let h = super::super::Layer::Dense(Dense::<f32>::new("h", 128, 1, Activation::Sigmoid, &mut rng).unwrap());
        assert_eq!(h.param_count(), 129);
    }

    #[test]
    fn dimension_mismatch() {
        let d = dense(&[1.0, 1.0], [2, 1], &[0.5]);
        assert!(d.infer(&Tensor::from_slice(&[1, 3], &[1.0, 2.0, 3.0]).unwrap()).is_err());
    }
}
