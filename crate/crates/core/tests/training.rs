use cxrnet_core::data::{preprocess, split, stack_planes, synth_dataset, AugmentConfig};
use cxrnet_core::model::{Architecture, Model};
use cxrnet_core::training::{bce_loss, evaluate, history_csv, train, train_step, RmsProp, TrainConfig};
use cxrnet_core::{weights, Error, Tensor};

fn small_aug() -> AugmentConfig {
    AugmentConfig { target_size: [12, 12], ..AugmentConfig::default() }
}

fn batch(n_per_class: usize, seed: u64) -> (Tensor<f64>, Vec<f64>) {
    let ds = synth_dataset(n_per_class, 24, 24, seed);
    let aug = small_aug();
    let planes: Vec<_> = ds.samples.iter().map(|s| preprocess(&s.image, &aug, None).unwrap()).collect();
    let y = ds.samples.iter().map(|s| s.label.target()).collect();
    (stack_planes(&planes, 12, 12).unwrap(), y)
}

fn mini(seed: u64) -> Model<f64> {
    Model::build(&Architecture::miniature(), seed).unwrap()
}

#[test]
fn zero_learning_rate_leaves_weights_unchanged() {
    let (x, y) = batch(4, 1);
    let mut m = mini(3);
    let before: Vec<_> = m.named_params().into_iter().filter(|(_, p)| p.trainable).map(|(_, p)| p.value.clone()).collect();
    let cfg = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
    let mut opt = RmsProp::new(&cfg);
    for _ in 0..3 {
        train_step(&mut m, &mut opt, &x, &y).unwrap();
    }
    let after: Vec<_> = m.named_params().into_iter().filter(|(_, p)| p.trainable).map(|(_, p)| p.value.clone()).collect();
    assert_eq!(before, after);
    assert!(opt.accumulators().iter().all(|a| a.data().iter().all(|&v| v >= 0.0)));
}

#[test]
fn loss_decreases_on_a_fixed_batch() {
    let (x, y) = batch(4, 2);
    let mut m = mini(5);
    let mut opt = RmsProp::new(&TrainConfig::default());
    let losses: Vec<f64> = (0..20).map(|_| train_step(&mut m, &mut opt, &x, &y).unwrap()).collect();
    let head: f64 = losses[..3].iter().sum::<f64>() / 3.0;
    let tail: f64 = losses[17..].iter().sum::<f64>() / 3.0;
    assert!(tail < head, "{losses:?}");
}

#[test]
fn loss_is_finite_at_exact_zero_and_one() {
    let p = Tensor::from_slice(&[4, 1], &[0.0f64, 1.0, 0.0, 1.0]).unwrap();
    let l = bce_loss(&p, &[0.0, 1.0, 1.0, 0.0]).unwrap();
    assert!(l.is_finite() && l >= 0.0);
}

#[test]
fn evaluate_does_not_touch_parameters() {
    let ds = synth_dataset(3, 24, 24, 4);
    let aug = small_aug();
    let mut m = mini(1);
    let (x, y) = batch(3, 4);
    train_step(&mut m, &mut RmsProp::new(&TrainConfig::default()), &x, &y).unwrap();
    let before = weights::encode(&m);
    let e = evaluate(&m, &ds, &TrainConfig::default(), &aug).unwrap();
    assert_eq!(weights::encode(&m), before);
    assert_eq!(e.confusion.total(), 6);
    assert_eq!(e.probabilities.len(), 6);
}

#[test]
fn training_is_deterministic_in_f64() {
    let ds = synth_dataset(6, 24, 24, 9);
    let (tr, va) = split(&ds, 0.67, 3).unwrap();
    let cfg = TrainConfig { epochs: 2, batch_size: 4, seed: 11, ..TrainConfig::default() };
    let aug = small_aug();
    let run = || {
        let mut m = mini(8);
        let h = train(&mut m, &tr, &va, &cfg, &aug, |_| {}).unwrap();
        (history_csv(&h), weights::encode(&m))
    };
    let (h1, w1) = run();
    let (h2, w2) = run();
    assert_eq!(h1, h2);
    assert_eq!(w1, w2);
    assert_eq!(h1.lines().count(), 3);
}

#[test]
fn train_rejects_degenerate_inputs() {
    let ds = synth_dataset(2, 24, 24, 1);
    let only_covid = cxrnet_core::Dataset::new(ds.samples[..2].to_vec());
    let mut m = mini(0);
    let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
    let res = train(&mut m, &only_covid, &ds, &cfg, &small_aug(), |_| {});
    assert!(matches!(res, Err(Error::Data(_))));
    let bad = TrainConfig { batch_size: 0, ..cfg };
    assert!(matches!(train(&mut m, &ds, &ds, &bad, &small_aug(), |_| {}), Err(Error::Config(_))));
}

#[test]
fn saved_weights_reproduce_forward_bitwise() {
    let (x, y) = batch(3, 6);
    let mut m = Model::<f32>::build(&Architecture::miniature(), 12).unwrap();
    let xf = x.cast::<f32>();
    let yf: Vec<f32> = y.iter().map(|&v| v as f32).collect();
    train_step(&mut m, &mut RmsProp::new(&TrainConfig::default()), &xf, &yf).unwrap();
    let bytes = weights::encode(&m);
    let mut fresh = Model::<f32>::build(&Architecture::miniature(), 99).unwrap();
    weights::load_into(&mut fresh, &bytes).unwrap();
    let a = m.infer(&xf).unwrap();
    let b = fresh.infer(&xf).unwrap();
    let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(weights::encode(&fresh), bytes);
}
