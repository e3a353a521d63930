//! Command-line front end. Exit codes: 0 ok, 1 other failure, 2 config,
//! 3 data, 4 weights.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use cxrnet_core::data::{derive_seed, preprocess, split, stack_planes, synth_dataset, AugmentConfig, AugmentParams};
use cxrnet_core::layers::Rng;
use cxrnet_core::metrics::{compute_metrics, MetricsReport};
use cxrnet_core::model::check_threshold;
use cxrnet_core::training::{evaluate, history_csv, train};
use cxrnet_core::{build_proposed_model, Dataset, GrayImage, Label, Scalar, TrainConfig};
use rand::SeedableRng;
use serde::Serialize;

use crate::config::{Overrides, Precision, ResolvedConfig, RunConfig};
use crate::dataset::{load_dataset, write_dataset};
use crate::error::AppError;
use crate::image_io::{encode_pgm, load_image};
use crate::persist::{load_weights, save_weights, write_atomic};

pub const WEIGHTS_FILE: &str = "weights.cxrw";
pub const HISTORY_FILE: &str = "history.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";
pub const PREVIEW_SIDECAR: &str = "augment_preview.json";

#[derive(Debug, Parser)]
#[command(name = "cxrnet", version, about = "Train and run a CNN chest X-ray classifier (covid vs normal)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the layer table with output shapes and parameter counts.
    Summary,
    /// Train on <data>/normal and <data>/covid and write run artifacts.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Seed for initialization, split, shuffling, dropout and augmentation.
        #[arg(long)]
        seed: Option<u64>,
        /// Fraction of each class used for training.
        #[arg(long)]
        split: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON run configuration; flags take precedence over it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        precision: Option<Precision>,
    },
    /// Evaluate saved weights on a labelled corpus.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        /// Directory for metrics.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, value_enum, default_value_t = Precision::F32)]
        precision: Precision,
    },
    /// Classify one image.
    Predict {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, value_enum, default_value_t = Precision::F32)]
        precision: Precision,
    },
    /// Write randomly augmented copies of an image plus a JSON sidecar.
    AugmentPreview {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate the seeded blob-vs-stripe corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 125)]
        per_class: usize,
        #[arg(long, default_value_t = 150)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), AppError> {
    match cmd {
        Command::Summary => cmd_summary(out),
        Command::Train { data, epochs, batch_size, lr, seed, split, out: out_dir, config, precision } => {
            let file = match config {
                Some(p) => RunConfig::from_file(&p)?,
                None => RunConfig::default(),
            };
            let flags = Overrides { data, out: out_dir, split, precision, epochs, batch_size, learning_rate: lr, seed };
            let cfg = file.resolve(&flags)?;
            match cfg.precision {
                Precision::F32 => cmd_train::<f32>(&cfg, out, err),
                Precision::F64 => cmd_train::<f64>(&cfg, out, err),
            }
        }
        Command::Eval { data, weights, out: dir, threshold, precision } => match precision {
            Precision::F32 => cmd_eval::<f32>(&data, &weights, &dir, threshold, out, err),
            Precision::F64 => cmd_eval::<f64>(&data, &weights, &dir, threshold, out, err),
        },
        Command::Predict { image, weights, threshold, precision } => match precision {
            Precision::F32 => cmd_predict::<f32>(&image, &weights, threshold, out),
            Precision::F64 => cmd_predict::<f64>(&image, &weights, threshold, out),
        },
        Command::AugmentPreview { image, seed, count, out: dir } => cmd_augment_preview(&image, seed, count, &dir, out),
        Command::Synth { out: dir, per_class, size, seed } => cmd_synth(&dir, per_class, size, seed, out),
    }
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<(), AppError> {
    out.write_fmt(text).and_then(|_| out.write_all(b"\n")).map_err(|e| AppError::Other(format!("writing output: {e}")))
}

fn create_dir(dir: &Path) -> Result<(), AppError> {
    fs::create_dir_all(dir).map_err(|e| AppError::Other(format!("cannot create {}: {e}", dir.display())))
}

pub fn cmd_summary(out: &mut dyn Write) -> Result<(), AppError> {
    let table = build_proposed_model::<f32>(0)?.summary()?;
    say(out, format_args!("{table}"))
}

fn load_corpus(root: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<Dataset, AppError> {
    let (ds, skipped) = load_dataset(root)?;
    for s in &skipped {
        let _ = writeln!(err, "warning: skipping {}: {}", s.path.display(), s.error);
    }
    say(
        out,
        format_args!(
            "loaded {} images from {} ({} covid, {} normal, {} skipped)",
            ds.len(),
            root.display(),
            ds.count(Label::Covid),
            ds.count(Label::Normal),
            skipped.len()
        ),
    )?;
    Ok(ds)
}

fn cmd_train<T: Scalar>(cfg: &ResolvedConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), AppError> {
    let ds = load_corpus(&cfg.data, out, err)?;
    let (train_set, val_set) = split(&ds, cfg.split, cfg.train.seed)?;
    say(out, format_args!("train {} / validation {} ({} precision)", train_set.len(), val_set.len(), T::NAME))?;
    create_dir(&cfg.out)?;

    let mut model = build_proposed_model::<T>(cfg.train.seed)?;
    let epochs = cfg.train.epochs;
    let mut write_failed = None;
    let history = train(&mut model, &train_set, &val_set, &cfg.train, &cfg.augment, |r| {
        let line = writeln!(
            out,
            "epoch {}/{epochs}  train_loss {:.4}  train_acc {:.4}  val_loss {:.4}  val_acc {:.4}",
            r.epoch, r.train_loss, r.train_acc, r.val_loss, r.val_acc
        );
        if let Err(e) = line {
            write_failed.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_failed {
        return Err(AppError::Other(format!("writing output: {e}")));
    }
    let eval = evaluate(&model, &val_set, &cfg.train, &cfg.augment)?;
    let report = compute_metrics(&eval.confusion);

    save_weights(&cfg.out.join(WEIGHTS_FILE), &model)?;
    write_atomic(&cfg.out.join(HISTORY_FILE), history_csv(&history).as_bytes())?;
    write_atomic(&cfg.out.join(METRICS_FILE), (report.to_json() + "\n").as_bytes())?;
    write_atomic(&cfg.out.join(RESOLVED_CONFIG_FILE), cfg.to_json().as_bytes())?;
    say(out, format_args!("validation metrics:\n{}", report.to_text().trim_end()))?;
    say(out, format_args!("wrote {}", cfg.out.display()))
}

fn cmd_eval<T: Scalar>(
    data: &Path,
    weights: &Path,
    dir: &Path,
    threshold: f64,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), AppError> {
    check_threshold(threshold)?;
    let mut model = build_proposed_model::<T>(0)?;
    load_weights(weights, &mut model)?;
    let ds = load_corpus(data, out, err)?;
    let cfg = TrainConfig { threshold, ..TrainConfig::default() };
    let eval = evaluate(&model, &ds, &cfg, &AugmentConfig::default())?;
    let report = compute_metrics(&eval.confusion);
    let cm = eval.confusion;
    say(out, format_args!("loss {:.6}  accuracy {:.4}", eval.loss, eval.accuracy))?;
    say(out, format_args!("tp {}  fp {}  tn {}  fn {}", cm.tp, cm.fp, cm.tn, cm.fn_))?;
    say(out, format_args!("{}", report.to_text().trim_end()))?;
    create_dir(dir)?;
    write_atomic(&dir.join(METRICS_FILE), (report.to_json() + "\n").as_bytes())
}

fn cmd_predict<T: Scalar>(image: &Path, weights: &Path, threshold: f64, out: &mut dyn Write) -> Result<(), AppError> {
    check_threshold(threshold)?;
    let img = load_image(image).map_err(|e| AppError::Data(e.to_string()))?;
    let mut model = build_proposed_model::<T>(0)?;
    load_weights(weights, &mut model)?;
    let aug = AugmentConfig::default();
    let [w, h] = aug.target_size;
    let x = stack_planes::<T>(&[preprocess(&img, &aug, None)?], w, h)?;
    let p = model.infer(&x)?.data()[0].as_f64();
    say(out, format_args!("label={} p={p}", Label::from_probability(p, threshold)))
}

#[derive(Serialize)]
struct PreviewEntry {
    file: String,
    #[serde(flatten)]
    params: AugmentParams,
}

#[derive(Serialize)]
struct PreviewSidecar {
    source: String,
    seed: u64,
    samples: Vec<PreviewEntry>,
}

const PREVIEW_STREAM: u64 = 0x9e_71e3;

fn cmd_augment_preview(image: &Path, seed: u64, count: usize, dir: &Path, out: &mut dyn Write) -> Result<(), AppError> {
    if count == 0 {
        return Err(AppError::Config("--count must be at least 1".into()));
    }
    let img = load_image(image).map_err(|e| AppError::Data(e.to_string()))?;
    let aug = AugmentConfig::default();
    let [w, h] = aug.target_size;
    create_dir(dir)?;
    let mut samples = Vec::with_capacity(count);
    for k in 0..count {
        let mut rng = Rng::seed_from_u64(derive_seed(seed, PREVIEW_STREAM, k as u64));
        let params = AugmentParams::sample(&aug, w, h, &mut rng);
        let plane = preprocess(&img, &aug, Some(&params))?;
        let pixels = plane.iter().map(|v| (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8).collect();
        let preview = GrayImage::new(w, h, pixels)?;
        let file = format!("augment_{k:03}.pgm");
        write_atomic(&dir.join(&file), &encode_pgm(&preview))?;
        samples.push(PreviewEntry { file, params });
    }
    let sidecar = PreviewSidecar { source: image.display().to_string(), seed, samples };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n";
    write_atomic(&dir.join(PREVIEW_SIDECAR), json.as_bytes())?;
    say(out, format_args!("wrote {count} previews and {PREVIEW_SIDECAR} to {}", dir.display()))
}

fn cmd_synth(dir: &Path, per_class: usize, size: usize, seed: u64, out: &mut dyn Write) -> Result<(), AppError> {
    if per_class == 0 || size == 0 {
        return Err(AppError::Config("--per-class and --size must be positive".into()));
    }
    write_dataset(dir, &synth_dataset(per_class, size, size, seed))?;
    say(out, format_args!("wrote {per_class} covid and {per_class} normal {size}x{size} images to {}", dir.display()))
}

/// Loads `metrics.json` as written by `train` or `eval`.
pub fn read_metrics(path: &Path) -> Result<MetricsReport, AppError> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    MetricsReport::from_json(&text).map_err(|e| AppError::Other(e.to_string()))
}
