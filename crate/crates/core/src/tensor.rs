//! Dense row-major tensors.
//!
//! Externally visible 4-D shapes are always `batch × height × width ×
//! channels`. There is no general broadcasting: binary operations need equal
//! shapes, and the per-channel variants broadcast a vector along the last axis.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{shape_err, Error, Result};
use crate::scalar::{gemm, Op, Scalar};

/// Extents of a tensor, rank 1 to 4, every extent at least 1.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > 4 {
            return Err(shape_err!("rank must be 1..=4, got {}", dims.len()));
        }
        if dims.contains(&0) {
            return Err(shape_err!("zero extent in {dims:?}"));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| shape_err!("element count of {dims:?} overflows"))?;
        Ok(Shape(dims.to_vec()))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    /// Row-major flat offset of `index`.
    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.0.len() {
            return Err(shape_err!("index rank {} for shape {self:?}", index.len()));
        }
        let mut off = 0;
        for (&i, &d) in index.iter().zip(&self.0) {
            if i >= d {
                return Err(shape_err!("index {index:?} out of bounds for {self:?}"));
            }
            off = off * d + i;
        }
        Ok(off)
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{d}")?;
        }
        if self.0.len() == 1 {
            f.write_str(",")?;
        }
        f.write_str(")")
    }
}

/// Elementwise binary operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

impl BinaryOp {
    #[inline]
    fn apply<T: Scalar>(self, a: T, b: T) -> T {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
        }
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(dims: &[usize], data: Vec<T>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != data.len() {
            return Err(shape_err!(
                "shape {shape:?} needs {} values, got {}",
                shape.numel(),
                data.len()
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn from_slice(dims: &[usize], data: &[T]) -> Result<Self> {
        Self::new(dims, data.to_vec())
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let shape = Shape::new(dims)?;
        Ok(Tensor { data: vec![T::zero(); shape.numel()], shape })
    }

    pub fn full(dims: &[usize], value: T) -> Result<Self> {
        let shape = Shape::new(dims)?;
        Ok(Tensor { data: vec![value; shape.numel()], shape })
    }

    pub(crate) fn from_parts(shape: Shape, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.numel(), data.len());
        Tensor { shape, data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Mutable access for in-place updates (optimizer steps, perturbations).
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> Result<T> {
        Ok(self.data[self.shape.offset(index)?])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_finite(self, op: &'static str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(op))
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    /// Elementwise `op(self, other)` on equal shapes.
    pub fn zip_with(&self, other: &Tensor<T>, op: BinaryOp) -> Result<Self> {
        if self.shape != other.shape {
            return Err(shape_err!("{op:?}: {:?} vs {:?}", self.shape, other.shape));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| op.apply(a, b)).collect();
        Tensor { shape: self.shape.clone(), data }.check_finite("elementwise op")
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Self> {
        self.zip_with(other, BinaryOp::Add)
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Self> {
        self.zip_with(other, BinaryOp::Sub)
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Self> {
        self.zip_with(other, BinaryOp::Mul)
    }

    pub fn scale(&self, s: T) -> Result<Self> {
        self.map(|v| v * s).check_finite("scale")
    }

    fn channel_op(&self, v: &[T], op: BinaryOp) -> Result<Self> {
        let ch = *self.dims().last().expect("rank >= 1");
        if v.len() != ch {
            return Err(shape_err!("per-channel vector of {} for {} channels", v.len(), ch));
        }
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(ch) {
            for (x, &c) in row.iter_mut().zip(v) {
                *x = op.apply(*x, c);
            }
        }
        Tensor { shape: self.shape.clone(), data }.check_finite("per-channel op")
    }

    /// Adds `v[c]` to every element of channel `c` (the last axis).
    pub fn add_channel(&self, v: &[T]) -> Result<Self> {
        self.channel_op(v, BinaryOp::Add)
    }

    /// Multiplies every element of channel `c` (the last axis) by `v[c]`.
    pub fn mul_channel(&self, v: &[T]) -> Result<Self> {
        self.channel_op(v, BinaryOp::Mul)
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Self> {
        let (&[m, k], &[k2, n]) = (self.dims(), other.dims()) else {
            return Err(shape_err!("matmul needs rank-2 operands, got {:?} and {:?}", self.shape, other.shape));
        };
        if k != k2 {
            return Err(shape_err!("matmul inner dims {:?} x {:?}", self.shape, other.shape));
        }
        let mut out = vec![T::zero(); m * n];
        gemm(Op::N, Op::N, m, k, n, &self.data, &other.data, T::zero(), &mut out);
        Tensor { shape: Shape(vec![m, n]), data: out }.check_finite("matmul")
    }

    /// Same data under a new shape with equal element count.
    pub fn reshape(&self, dims: &[usize]) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != self.len() {
            return Err(shape_err!("cannot reshape {:?} into {shape:?}", self.shape));
        }
        Ok(Tensor { shape, data: self.data.clone() })
    }

    pub fn into_reshape(self, dims: &[usize]) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != self.len() {
            return Err(shape_err!("cannot reshape {:?} into {shape:?}", self.shape));
        }
        Ok(Tensor { shape, data: self.data })
    }

    /// Rows `start..end` of the leading (batch) axis.
    pub fn batch_slice(&self, start: usize, end: usize) -> Result<Self> {
        let n = self.dims()[0];
        if start >= end || end > n {
            return Err(shape_err!("batch range {start}..{end} of {n}"));
        }
        let per = self.len() / n;
        let mut dims = self.dims().to_vec();
        dims[0] = end - start;
        Ok(Tensor { shape: Shape(dims), data: self.data[start * per..end * per].to_vec() })
    }
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor").field("shape", &self.shape).field("data", &self.data).finish()
    }
}
