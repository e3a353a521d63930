//! The sequential classifier: architecture description, parameter
//! accounting, forward inference and backpropagation through the stack.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::SeedableRng;

use crate::data::Label;
use crate::error::{shape_err, Error, Result};
use crate::layers::{Activation, BatchNorm, Conv2d, Dense, Dropout, Flatten, Layer, MaxPool2d, Mode, Param, Rng};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// One convolution block: `Conv(ReLU) → [Dropout] → BatchNorm → MaxPool`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvBlock {
    pub filters: usize,
    pub dropout: bool,
}

/// Shape of a network built from convolution blocks followed by a
/// `Flatten → Dense(ReLU) → [Dropout] → Dense(1, sigmoid)` head.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    /// Per-sample input `(height, width, channels)`.
    pub input: [usize; 3],
    pub blocks: Vec<ConvBlock>,
    pub kernel_size: usize,
    pub pool_size: usize,
    pub dense_units: usize,
    pub dense_dropout: bool,
    pub dropout_rate: f64,
}

impl Architecture {
    /// The 150×150×1 classifier with 1,246,401 parameters.
    pub fn proposed() -> Self {
        let block = |filters, dropout| ConvBlock { filters, dropout };
        Architecture {
            input: [150, 150, 1],
            blocks: vec![block(32, false), block(64, true), block(64, false), block(128, true), block(256, true)],
            kernel_size: 3,
            pool_size: 2,
            dense_units: 128,
            dense_dropout: true,
            dropout_rate: 0.2,
        }
    }

    /// A scaled-down clone of [`Architecture::proposed`] (12×12 input,
    /// channels 2-4-4-8-8) with the same layer sequence, cheap enough for
    /// whole-network finite-difference checks.
    pub fn miniature() -> Self {
        let mut arch = Self::proposed();
        arch.input = [12, 12, 1];
        for (b, f) in arch.blocks.iter_mut().zip([2, 4, 4, 8, 8]) {
            b.filters = f;
        }
        arch.dense_units = 4;
        arch
    }
}

/// One row of the model summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerRow {
    pub name: String,
    pub kind: &'static str,
    /// Per-sample output shape (the batch axis is printed as `None`).
    pub output: Vec<usize>,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerTable {
    pub rows: Vec<LayerRow>,
    pub trainable: usize,
    pub non_trainable: usize,
}

impl LayerTable {
    pub fn total(&self) -> usize {
        self.trainable + self.non_trainable
    }
}

fn grouped(n: usize) -> String {
    let digits = format!("{n}");
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

pub fn format_output_shape(dims: &[usize]) -> String {
    let mut s = String::from("(None");
    for d in dims {
        s.push_str(&format!(", {d}"));
    }
    s.push(')');
    s
}

impl fmt::Display for LayerTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rule = "=".repeat(78);
        writeln!(f, "{:<36}{:<28}{:>14}", "Layer (type)", "Output Shape", "Param #")?;
        writeln!(f, "{rule}")?;
        for row in &self.rows {
            let label = format!("{} ({})", row.name, row.kind);
            writeln!(f, "{:<36}{:<28}{:>14}", label, format_output_shape(&row.output), row.params)?;
        }
        writeln!(f, "{rule}")?;
        writeln!(f, "Total params: {}", grouped(self.total()))?;
        writeln!(f, "Trainable params: {}", grouped(self.trainable))?;
        write!(f, "Non-trainable params: {}", grouped(self.non_trainable))
    }
}

/// A sequential network with its dropout generator.
#[derive(Debug, Clone)]
pub struct Model<T> {
    arch: Architecture,
    layers: Vec<Layer<T>>,
    rng: Rng,
}

struct Namer {
    counts: [usize; 6],
}

impl Namer {
    fn next(&mut self, slot: usize, stem: &str) -> String {
        self.counts[slot] += 1;
        format!("{stem}_{}", self.counts[slot])
    }
}

/// Seed stream for weight initialization, kept apart from the dropout stream.
const INIT_STREAM: u64 = 0x1b17_5eed;

impl<T: Scalar> Model<T> {
    /// Builds `arch` with weights drawn deterministically from `seed`.
    pub fn build(arch: &Architecture, seed: u64) -> Result<Self> {
        if arch.blocks.is_empty() {
            return Err(Error::Config("architecture needs at least one convolution block".into()));
        }
        let mut init = Rng::seed_from_u64(crate::data::derive_seed(seed, INIT_STREAM, 0));
        let mut names = Namer { counts: [0; 6] };
        let mut layers = Vec::new();
        let [mut h, mut w, mut c] = arch.input;
        for block in &arch.blocks {
            layers.push(Layer::Conv2d(Conv2d::new(
                names.next(0, "conv2d"),
                c,
                block.filters,
                arch.kernel_size,
                Activation::Relu,
                &mut init,
            )?));
            c = block.filters;
            if block.dropout {
                layers.push(Layer::Dropout(Dropout::new(names.next(1, "dropout"), arch.dropout_rate)?));
            }
            layers.push(Layer::BatchNorm(BatchNorm::new(names.next(2, "batch_normalization"), c)));
            layers.push(Layer::MaxPool2d(MaxPool2d::new(names.next(3, "max_pooling2d"), arch.pool_size)));
            h = crate::layers::pooled_extent(h, arch.pool_size);
            w = crate::layers::pooled_extent(w, arch.pool_size);
        }
        layers.push(Layer::Flatten(Flatten::new(names.next(4, "flatten"))));
        layers.push(Layer::Dense(Dense::new(names.next(5, "dense"), h * w * c, arch.dense_units, Activation::Relu, &mut init)?));
        if arch.dense_dropout {
            layers.push(Layer::Dropout(Dropout::new(names.next(1, "dropout"), arch.dropout_rate)?));
        }
        layers.push(Layer::Dense(Dense::new(names.next(5, "dense"), arch.dense_units, 1, Activation::Sigmoid, &mut init)?));
        Ok(Model { arch: arch.clone(), layers, rng: Rng::seed_from_u64(seed) })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// Restarts the dropout generator; identical seeds give identical masks.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = Rng::seed_from_u64(seed);
    }

    pub fn summary(&self) -> Result<LayerTable> {
        let mut dims = self.arch.input.to_vec();
        let mut rows = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            dims = layer.output_dims(&dims)?;
            rows.push(LayerRow {
                name: layer.name().into(),
                kind: layer.kind(),
                output: dims.clone(),
                params: layer.param_count(),
            });
        }
        let trainable = self.layers.iter().map(Layer::trainable_param_count).sum::<usize>();
        let total = self.layers.iter().map(Layer::param_count).sum::<usize>();
        Ok(LayerTable { rows, trainable, non_trainable: total - trainable })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// `(qualified name, parameter)` for every parameter, in layer order.
    pub fn named_params(&self) -> Vec<(String, &Param<T>)> {
        self.layers
            .iter()
            .flat_map(|l| l.params().into_iter().map(move |p| (format!("{}/{}", l.name(), p.name), p)))
            .collect()
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Param<T>)> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                let name = String::from(l.name());
                l.params_mut().into_iter().map(move |p| (format!("{name}/{}", p.name), p))
            })
            .collect()
    }

    pub fn trainable_params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).filter(|p| p.trainable).collect()
    }

    /// Marks every batch-norm layer's moving statistics as populated.
    pub(crate) fn mark_stats_ready(&mut self) {
        for layer in &mut self.layers {
            if let Layer::BatchNorm(bn) = layer {
                bn.mark_stats_ready();
            }
        }
    }

    fn check_batch(&self, batch: &Tensor<T>) -> Result<()> {
        let d = batch.dims();
        if d.len() != 4 || d[1..] != self.arch.input {
            return Err(shape_err!(
                "model expects a batch of shape (N, {}, {}, {}), got {:?}",
                self.arch.input[0],
                self.arch.input[1],
                self.arch.input[2],
                batch.shape()
            ));
        }
        Ok(())
    }

    /// Forward pass returning `(N, 1)` probabilities.
    ///
    /// Train mode samples dropout masks, uses batch statistics and caches
    /// everything [`Model::backward_from_logits`] needs. Eval mode is the
    /// side-effect-free [`Model::infer`].
    pub fn forward(&mut self, batch: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if mode == Mode::Eval {
            return self.infer(batch);
        }
        self.check_batch(batch)?;
        let mut x = batch.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x, mode, &mut self.rng)?;
            if !x.is_finite() {
                return Err(Error::NonFinite("model forward"));
            }
        }
        Ok(x)
    }

    /// Eval-mode forward pass; a pure function of weights and input.
    pub fn infer(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_batch(batch)?;
        let mut layers = self.layers.iter();
        let first = layers.next().expect("model has layers");
        let mut x = first.infer(batch)?;
        for layer in layers {
            x = layer.infer(&x)?;
            if !x.is_finite() {
                return Err(Error::NonFinite("model forward"));
            }
        }
        Ok(x)
    }

    /// Thresholded labels: covid iff probability ≥ `threshold`.
    pub fn predict(&self, batch: &Tensor<T>, threshold: f64) -> Result<Vec<Label>> {
        check_threshold(threshold)?;
        let p = self.infer(batch)?;
        Ok(p.data().iter().map(|&v| Label::from_probability(v.as_f64(), threshold)).collect())
    }

    /// Backpropagates a gradient given with respect to the network output.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<()> {
        let mut g = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(())
    }

    /// Backpropagates a gradient given with respect to the pre-sigmoid
    /// logits, bypassing the final activation (fused sigmoid + cross-entropy).
    pub fn backward_from_logits(&mut self, grad_logits: &Tensor<T>) -> Result<()> {
        let (head, body) = self.layers.split_last_mut().expect("model has layers");
        let Layer::Dense(head) = head else {
            return Err(Error::State("final layer is not dense".into()));
        };
        let mut g = head.backward_pre_activation(grad_logits)?;
        for layer in body.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(())
    }

    /// Drops every cached forward context.
    pub fn clear_caches(&mut self) {
        self.layers.iter_mut().for_each(Layer::clear_cache);
    }

    /// Copies all parameters into a model computing in another precision.
    pub fn cast<U: Scalar>(&self) -> Result<Model<U>> {
        let mut out = Model::<U>::build(&self.arch, 0)?;
        out.rng = self.rng.clone();
        for ((_, src), (_, dst)) in self.named_params().into_iter().zip(out.named_params_mut()) {
            dst.value = src.value.cast();
        }
        for (src, dst) in self.layers.iter().zip(out.layers.iter_mut()) {
            if let (Layer::BatchNorm(a), Layer::BatchNorm(b)) = (src, dst) {
                if a.stats_ready() {
                    b.mark_stats_ready();
                }
            }
        }
        Ok(out)
    }
}

pub fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("threshold must lie in (0, 1), got {threshold}")))
    }
}

/// Shorthand for `Model::build(&Architecture::proposed(), seed)`.
pub fn build_proposed_model<T: Scalar>(seed: u64) -> Result<Model<T>> {
    Model::build(&Architecture::proposed(), seed)
}
