use cxrnet_core::layers::Mode;
use cxrnet_core::model::{Architecture, Model};
use cxrnet_core::{build_proposed_model, Error, Tensor};

const GOLDEN: [(&str, &str, &[usize], usize); 22] = [
    ("conv2d_1", "Conv2D", &[150, 150, 32], 320),
    ("batch_normalization_1", "BatchNormalization", &[150, 150, 32], 128),
    ("max_pooling2d_1", "MaxPooling2D", &[75, 75, 32], 0),
    ("conv2d_2", "Conv2D", &[75, 75, 64], 18496),
    ("dropout_1", "Dropout", &[75, 75, 64], 0),
    ("batch_normalization_2", "BatchNormalization", &[75, 75, 64], 256),
    ("max_pooling2d_2", "MaxPooling2D", &[38, 38, 64], 0),
    ("conv2d_3", "Conv2D", &[38, 38, 64], 36928),
    ("batch_normalization_3", "BatchNormalization", &[38, 38, 64], 256),
    ("max_pooling2d_3", "MaxPooling2D", &[19, 19, 64], 0),
    ("conv2d_4", "Conv2D", &[19, 19, 128], 73856),
    ("dropout_2", "Dropout", &[19, 19, 128], 0),
    ("batch_normalization_4", "BatchNormalization", &[19, 19, 128], 512),
    ("max_pooling2d_4", "MaxPooling2D", &[10, 10, 128], 0),
    ("conv2d_5", "Conv2D", &[10, 10, 256], 295168),
    ("dropout_3", "Dropout", &[10, 10, 256], 0),
    ("batch_normalization_5", "BatchNormalization", &[10, 10, 256], 1024),
    ("max_pooling2d_5", "MaxPooling2D", &[5, 5, 256], 0),
    ("flatten_1", "Flatten", &[6400], 0),
    ("dense_1", "Dense", &[128], 819328),
    ("dropout_4", "Dropout", &[128], 0),
    ("dense_2", "Dense", &[1], 129),
];

#[test]
fn proposed_summary_matches_golden_table() {
    let table = build_proposed_model::<f32>(0).unwrap().summary().unwrap();
    assert_eq!(table.rows.len(), GOLDEN.len());
    for (row, (name, kind, out, params)) in table.rows.iter().zip(GOLDEN) {
        assert_eq!((row.name.as_str(), row.kind, &row.output[..], row.params), (name, kind, out, params));
    }
    assert_eq!(table.total(), 1_246_401);
    let text = table.to_string();
    assert!(text.contains("Total params: 1,246,401"), "{text}");
    assert!(text.contains("(None, 5, 5, 256)"));
}

#[test]
fn counts_follow_layer_formulas() {
    // Conv: k²·c_in·c_out + c_out, batch norm: 4·c, dense: n_in·n_out + n_out.
    let arch = Architecture::proposed();
    let k = arch.kernel_size;
    let mut c_in = arch.input[2];
    let mut side = arch.input[0];
    let mut expected = 0;
    for b in &arch.blocks {
        expected += k * k * c_in * b.filters + b.filters + 4 * b.filters;
        c_in = b.filters;
        side = side.div_ceil(arch.pool_size);
    }
    let flat = side * side * c_in;
    assert_eq!(flat, 6400);
    expected += flat * arch.dense_units + arch.dense_units + arch.dense_units + 1;
    let model = build_proposed_model::<f32>(0).unwrap();
    assert_eq!(model.param_count(), expected);
    // Moving statistics are the only non-trainable parameters.
    let moving: usize = arch.blocks.iter().map(|b| 2 * b.filters).sum();
    assert_eq!(model.summary().unwrap().non_trainable, moving);
}

#[test]
fn forward_produces_probabilities_in_eval_after_a_train_batch() {
    let mut model = Model::<f32>::build(&Architecture::miniature(), 2).unwrap();
    let x = Tensor::full(&[3, 12, 12, 1], 0.25f32).unwrap();
    assert!(matches!(model.forward(&x, Mode::Eval), Err(Error::State(_))));
    let x = Tensor::new(&[3, 12, 12, 1], (0..432).map(|i| (i % 13) as f32 / 13.0).collect()).unwrap();
    let p = model.forward(&x, Mode::Train).unwrap();
    assert_eq!(p.dims(), &[3, 1]);
    let q = model.forward(&x, Mode::Eval).unwrap();
    assert!(p.data().iter().chain(q.data()).all(|&v| (0.0..=1.0).contains(&v)));
    let wrong = Tensor::<f32>::zeros(&[1, 10, 12, 1]).unwrap();
    assert!(matches!(model.infer(&wrong), Err(Error::Shape(_))));
}
