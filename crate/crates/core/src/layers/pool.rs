use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{expect_rank, missing_context};
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Max pooling with a square window equal to its stride.
///
/// Output extent is `ceil(in / size)`; windows on the bottom and right edges
/// are truncated instead of padded, so 75 pools to 38.
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    pub name: String,
    pub size: usize,
    cache: Option<Cache>,
}

#[derive(Debug, Clone)]
struct Cache {
    input_dims: Vec<usize>,
    output_dims: Vec<usize>,
    /// Flat input offset of the winning element, one per output element.
    argmax: Vec<usize>,
}

/// Output extent for an input extent under ceil-mode pooling.
pub fn pooled_extent(extent: usize, size: usize) -> usize {
    extent.div_ceil(size)
}

impl MaxPool2d {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        assert!(size >= 1, "pool size must be positive");
        MaxPool2d { name: name.into(), size, cache: None }
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        expect_rank(input, 3, &self.name)?;
        Ok(vec![pooled_extent(input[0], self.size), pooled_extent(input[1], self.size), input[2]])
    }

    fn compute<T: Scalar>(&self, x: &Tensor<T>, argmax: Option<&mut Vec<usize>>) -> Result<Tensor<T>> {
        expect_rank(x.dims(), 4, &self.name)?;
        let &[n, h, w, c] = x.dims() else { unreachable!() };
        let (oh, ow) = (pooled_extent(h, self.size), pooled_extent(w, self.size));
        let mut out = Vec::with_capacity(n * oh * ow * c);
        let mut idx = Vec::new();
        let record = argmax.is_some();
        let data = x.data();
        for b in 0..n {
            for oy in 0..oh {
                let y_end = ((oy + 1) * self.size).min(h);
                for ox in 0..ow {
                    let x_end = ((ox + 1) * self.size).min(w);
                    for ch in 0..c {
                        let mut best = usize::MAX;
                        for iy in oy * self.size..y_end {
                            for ix in ox * self.size..x_end {
                                let off = ((b * h + iy) * w + ix) * c + ch;
                                if best == usize::MAX || data[off] > data[best] {
                                    best = off;
                                }
                            }
                        }
                        assert!(best != usize::MAX, "empty pooling window");
                        out.push(data[best]);
                        if record {
                            idx.push(best);
                        }
                    }
                }
            }
        }
        if let Some(a) = argmax {
            *a = idx;
        }
        Ok(Tensor::from_parts(Shape::new(&[n, oh, ow, c])?, out))
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut argmax = Vec::new();
        let y = self.compute(x, Some(&mut argmax))?;
        self.cache = Some(Cache {
            input_dims: x.dims().to_vec(),
            output_dims: y.dims().to_vec(),
            argmax,
        });
        Ok(y)
    }

    pub fn infer<T: Scalar>(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.compute(x, None)
    }

    /// Routes each output gradient to the input position that won the max.
    pub fn backward<T: Scalar>(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.cache.as_ref().ok_or_else(|| missing_context(&self.name))?;
        if grad_out.dims() != cache.output_dims.as_slice() {
            return Err(shape_err!("{}: gradient {:?} for output {:?}", self.name, grad_out.dims(), cache.output_dims));
        }
        let mut grad_in = vec![T::zero(); cache.input_dims.iter().product()];
        for (&g, &i) in grad_out.data().iter().zip(&cache.argmax) {
            grad_in[i] += g;
        }
        Ok(Tensor::from_parts(Shape::new(&cache.input_dims)?, grad_in))
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = None;
    }
}
