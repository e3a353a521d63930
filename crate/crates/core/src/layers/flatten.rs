use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::missing_context;
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Collapses `(N, H, W, C)` into `(N, H·W·C)` in row-major order.
#[derive(Debug, Clone)]
pub struct Flatten {
    pub name: String,
    input_dims: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new(name: impl Into<String>) -> Self {
        Flatten { name: name.into(), input_dims: None }
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != 3 {
            return Err(shape_err!("{}: expected rank 3 sample, got {input:?}", self.name));
        }
        Ok(vec![input.iter().product()])
    }

    pub fn infer<T: Scalar>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        flatten(x)
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = flatten(x)?;
        self.input_dims = Some(x.dims().to_vec());
        Ok(y)
    }

    pub fn backward<T: Scalar>(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let dims = self.input_dims.as_ref().ok_or_else(|| missing_context(&self.name))?;
        grad_out.reshape(dims)
    }

    pub(crate) fn clear_cache(&mut self) {
        self.input_dims = None;
    }
}

pub fn flatten<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let &[n, h, w, c] = x.dims() else {
        return Err(shape_err!("flatten expects rank 4, got {:?}", x.shape()));
    };
    x.reshape(&[n, h * w * c])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_examples() {
        let a = Tensor::<f32>::zeros(&[1, 5, 5, 256]).unwrap();
        assert_eq!(flatten(&a).unwrap().dims(), &[1, 6400]);
        let b = Tensor::<f32>::zeros(&[1, 1, 1, 1]).unwrap();
        assert_eq!(flatten(&b).unwrap().dims(), &[1, 1]);
        let c = Tensor::new(&[2, 2, 2, 1], (1..=8).map(|v| v as f64).collect()).unwrap();
        let f = flatten(&c).unwrap();
        assert_eq!(f.dims(), &[2, 4]);
        assert_eq!(f.data(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert!(flatten(&Tensor::<f32>::zeros(&[2, 3]).unwrap()).is_err());
    }
}
