use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng as _;

use super::{expect_rank, missing_context, Activation, Param, Rng};
use crate::error::{shape_err, Result};
use crate::scalar::{gemm, Op, Scalar};
use crate::tensor::{Shape, Tensor};

/// Stride-1 "same" convolution (cross-correlation, no kernel flip) over NHWC
/// input with a fused activation.
///
/// The kernel is stored `(k, k, in_channels, out_channels)`, which read as a
/// row-major matrix is exactly the `(k·k·in) × out` operand of the im2col
/// product.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub name: String,
    pub kernel: Param<T>,
    pub bias: Param<T>,
    pub activation: Activation,
    cache: Option<Cache<T>>,
}

#[derive(Debug, Clone)]
struct Cache<T> {
    input: Tensor<T>,
    output: Tensor<T>,
}

impl<T: Scalar> Conv2d<T> {
    /// Kernel weights drawn from `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero bias.
    pub fn new(
        name: impl Into<String>,
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        let fan_in = kernel_size * kernel_size * in_channels;
        let limit = Float::sqrt(6.0 / fan_in as f64);
        let data = (0..fan_in * out_channels)
            .map(|_| T::from_f64(rng.random_range(-limit..limit)))
            .collect();
        let kernel = Tensor::new(&[kernel_size, kernel_size, in_channels, out_channels], data)?;
        Self::from_params(name, kernel, Tensor::zeros(&[out_channels])?, activation)
    }

    pub fn from_params(
        name: impl Into<String>,
        kernel: Tensor<T>,
        bias: Tensor<T>,
        activation: Activation,
    ) -> Result<Self> {
        let &[kh, kw, _, out] = kernel.dims() else {
            return Err(shape_err!("conv kernel must be rank 4, got {:?}", kernel.shape()));
        };
        if kh != kw || kh % 2 == 0 {
            return Err(shape_err!("conv kernel must be square with odd size, got {kh}x{kw}"));
        }
        if bias.dims() != [out] {
            return Err(shape_err!("conv bias {:?} for {out} output channels", bias.shape()));
        }
        Ok(Conv2d {
            name: name.into(),
            kernel: Param::new("kernel", kernel, true),
            bias: Param::new("bias", bias, true),
            activation,
            cache: None,
        })
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel.value.dims()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.value.dims()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.value.dims()[3]
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        expect_rank(input, 3, &self.name)?;
        if input[2] != self.in_channels() {
            return Err(shape_err!(
                "{}: input has {} channels, kernel expects {}",
                self.name,
                input[2],
                self.in_channels()
            ));
        }
        Ok(vec![input[0], input[1], self.out_channels()])
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
        expect_rank(x.dims(), 4, &self.name)?;
        self.output_dims(&x.dims()[1..])?;
        let d = x.dims();
        Ok((d[0], d[1], d[2], d[3]))
    }

    fn compute(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, h, w, c) = self.check_input(x)?;
        let k = self.kernel_size();
        let out_c = self.out_channels();
        let patch = k * k * c;
        let hw = h * w;
        let mut cols = vec![T::zero(); hw * patch];
        let mut out = vec![T::zero(); n * hw * out_c];
        let kernel = self.kernel.value.data();
        for (xs, ys) in x.data().chunks_exact(hw * c).zip(out.chunks_exact_mut(hw * out_c)) {
            im2col(xs, h, w, c, k, &mut cols);
            gemm(Op::N, Op::N, hw, patch, out_c, &cols, kernel, T::zero(), ys);
        }
        let bias = self.bias.value.data();
        for row in out.chunks_exact_mut(out_c) {
            row.iter_mut().zip(bias).for_each(|(v, &b)| *v += b);
        }
        self.activation.apply_in_place(&mut out);
        Tensor::new(&[n, h, w, out_c], out)?.check_finite("conv2d")
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
        if grad_out.shape() != cache.output.shape() {
            return Err(shape_err!(
                "{}: gradient {:?} for output {:?}",
                self.name,
                grad_out.shape(),
                cache.output.shape()
            ));
        }
        let d = cache.input.dims();
        let (h, w, c) = (d[1], d[2], d[3]);
        let k = self.kernel_size();
        let out_c = self.out_channels();
        let patch = k * k * c;
        let hw = h * w;

        let mut grad_pre = grad_out.data().to_vec();
        self.activation.backprop_in_place(cache.output.data(), &mut grad_pre);

        self.kernel.zero_grad();
        self.bias.zero_grad();
        for row in grad_pre.chunks_exact(out_c) {
            self.bias.grad.data_mut().iter_mut().zip(row).for_each(|(g, &v)| *g += v);
        }

        let mut cols = vec![T::zero(); hw * patch];
        let mut grad_cols = vec![T::zero(); hw * patch];
        let mut grad_in = vec![T::zero(); cache.input.len()];
        let kernel = self.kernel.value.data();
        for ((xs, gs), gx) in cache
            .input
            .data()
            .chunks_exact(hw * c)
            .zip(grad_pre.chunks_exact(hw * out_c))
            .zip(grad_in.chunks_exact_mut(hw * c))
        {
            im2col(xs, h, w, c, k, &mut cols);
            // dK += colsᵀ · dY
            gemm(Op::T, Op::N, patch, hw, out_c, &cols, gs, T::one(), self.kernel.grad.data_mut());
            // dCols = dY · Kᵀ
            gemm(Op::N, Op::T, hw, out_c, patch, gs, kernel, T::zero(), &mut grad_cols);
            col2im(&grad_cols, h, w, c, k, gx);
        }
        Ok(Tensor::from_parts(Shape::new(d)?, grad_in))
    }

    pub(crate) fn clear_cache(&mut self) {
        self.cache = None;
    }
}

/// Unfolds one `h × w × c` image into `(h·w) × (k·k·c)` patch rows, zero
/// padded so every output pixel has a full window.
pub(crate) fn im2col<T: Scalar>(x: &[T], h: usize, w: usize, c: usize, k: usize, cols: &mut [T]) {
    let pad = (k / 2) as isize;
    let patch = k * k * c;
    for oy in 0..h {
        for ox in 0..w {
            let row = &mut cols[(oy * w + ox) * patch..][..patch];
            for ky in 0..k {
                let iy = oy as isize + ky as isize - pad;
                for kx in 0..k {
                    let ix = ox as isize + kx as isize - pad;
                    let dst = &mut row[(ky * k + kx) * c..][..c];
                    if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                        let src = (iy as usize * w + ix as usize) * c;
                        dst.copy_from_slice(&x[src..src + c]);
                    } else {
                        dst.fill(T::zero());
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds patch rows back onto the image.
pub(crate) fn col2im<T: Scalar>(cols: &[T], h: usize, w: usize, c: usize, k: usize, x: &mut [T]) {
    let pad = (k / 2) as isize;
    let patch = k * k * c;
    x.fill(T::zero());
    for oy in 0..h {
        for ox in 0..w {
            let row = &cols[(oy * w + ox) * patch..][..patch];
            for ky in 0..k {
                let iy = oy as isize + ky as isize - pad;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let ix = ox as isize + kx as isize - pad;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let dst = (iy as usize * w + ix as usize) * c;
                    let src = &row[(ky * k + kx) * c..][..c];
                    x[dst..dst + c].iter_mut().zip(src).for_each(|(a, &b)| *a += b);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn conv(kernel: Tensor<f64>, bias: &[f64]) -> Conv2d<f64> {
        let b = Tensor::from_slice(&[bias.len()], bias).unwrap();
        Conv2d::from_params("c", kernel, b, Activation::Linear).unwrap()
    }

    #[test]
    fn all_ones_same_padding() {
        let x = Tensor::full(&[1, 3, 3, 1], 1.0).unwrap();
        let mut c = conv(Tensor::full(&[3, 3, 1, 1], 1.0).unwrap(), &[0.0]);
        let y = c.forward(&x).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn zero_kernel_gives_bias() {
        let mut rng = Rng::seed_from_u64(3);
        let x = Tensor::new(&[2, 5, 4, 2], (0..80).map(|_| rng.random::<f64>()).collect()).unwrap();
        let c = conv(Tensor::zeros(&[3, 3, 2, 3]).unwrap(), &[0.5, -1.0, 2.0]);
        let y = c.infer(&x).unwrap();
        for px in y.data().chunks(3) {
            assert_eq!(px, &[0.5, -1.0, 2.0]);
        }
    }

    #[test]
    fn first_block_shape() {
        let mut rng = Rng::seed_from_u64(0);
        let c = Conv2d::<f32>::new("c", 1, 32, 3, Activation::Relu, &mut rng).unwrap();
        assert_eq!(c.output_dims(&[150, 150, 1]).unwrap(), [150, 150, 32]);
        assert_eq!(c.kernel.value.len() + c.bias.value.len(), 320);
        assert!(c.output_dims(&[150, 150, 2]).is_err());
    }

    #[test]
    fn backward_without_forward_is_state_error() {
        let mut c = conv(Tensor::zeros(&[3, 3, 1, 1]).unwrap(), &[0.0]);
        let g = Tensor::zeros(&[1, 3, 3, 1]).unwrap();
        assert!(matches!(c.backward(&g), Err(crate::Error::State(_))));
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let mut rng = Rng::seed_from_u64(9);
        let (h, w, c, k) = (4, 5, 2, 3);
        let x: Vec<f64> = (0..h * w * c).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..h * w * k * k * c).map(|_| rng.random()).collect();
        let mut cols = vec![0.0; y.len()];
        im2col(&x, h, w, c, k, &mut cols);
        let mut back = vec![0.0; x.len()];
        col2im(&y, h, w, c, k, &mut back);
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
