use std::fs;
use std::path::Path;

use cxrnet::cli::run;
use cxrnet::dataset::load_dataset;
use cxrnet::image_io::{encode_pgm, encode_png};
use cxrnet::AppError;
use cxrnet_core::{GrayImage, Label};
use tempfile::TempDir;

fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["cxrnet"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(root: &Path, covid: usize, normal: usize) {
    for (label, n) in [(Label::Covid, covid), (Label::Normal, normal)] {
        let dir = root.join(label.dir_name());
        fs::create_dir_all(&dir).unwrap();
        for i in 0..n {
            let img = GrayImage::new(8, 6, (0..48).map(|v| (v * 5 + i * 3) as u8).collect()).unwrap();
            let bytes = if i % 2 == 0 { encode_pgm(&img) } else { encode_png(&img) };
            let ext = if i % 2 == 0 { "pgm" } else { "png" };
            fs::write(dir.join(format!("img{i}.{ext}")), bytes).unwrap();
        }
    }
}

#[test]
fn dataset_enumeration_and_skips() {
    let tmp = TempDir::new().unwrap();
    corpus(tmp.path(), 3, 2);
    fs::write(tmp.path().join("covid/notes.txt"), "ignored").unwrap();
    let (ds, skipped) = load_dataset(tmp.path()).unwrap();
    assert_eq!((ds.len(), ds.count(Label::Covid), ds.count(Label::Normal)), (5, 3, 2));
    assert!(skipped.is_empty());
    let names: Vec<_> = ds.samples.iter().map(|s| Path::new(&s.source).file_name().unwrap().to_owned()).collect();
    // Normal first, then covid, each in file-name order.
    assert_eq!(names, ["img0.pgm", "img1.png", "img0.pgm", "img1.png", "img2.pgm"]);

    fs::write(tmp.path().join("normal/broken.pgm"), b"P5\n4 4\n255\n\x01").unwrap();
    let (ds, skipped) = load_dataset(tmp.path()).unwrap();
    assert_eq!(ds.len(), 5);
    assert_eq!(skipped.len(), 1);
    assert!(skipped[0].path.ends_with("normal/broken.pgm"));
}

#[test]
fn dataset_errors_name_the_class() {
    let tmp = TempDir::new().unwrap();
    corpus(tmp.path(), 0, 2);
    match load_dataset(tmp.path()) {
        Err(AppError::Data(msg)) => assert!(msg.contains("covid"), "{msg}"),
        other => panic!("{other:?}"),
    }
    fs::remove_dir(tmp.path().join("covid")).unwrap();
    match load_dataset(tmp.path()) {
        Err(AppError::Data(msg)) => assert!(msg.contains("covid"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let (code, _, err) = cli(&["train", "--data", s(tmp.path()), "--epochs", "1"]);
    assert_eq!(code, 3);
    assert!(err.contains("covid"), "{err}");
}

#[test]
fn summary_prints_the_table() {
    let (code, out, _) = cli(&["summary"]);
    assert_eq!(code, 0);
    assert!(out.lines().any(|l| l.contains("(None, 10, 10, 256)") && l.trim_end().ends_with("295168")));
    assert!(out.contains("Total params: 1,246,401"));
}

#[test]
fn usage_errors_are_config_errors() {
    assert_eq!(cli(&["train", "--epochs", "many"]).0, 2);
    assert_eq!(cli(&["bogus"]).0, 2);
    assert_eq!(cli(&["--help"]).0, 0);
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"train": {"epochz": 1}}"#).unwrap();
    assert_eq!(cli(&["train", "--data", "x", "--config", s(&cfg)]).0, 2);
    assert_eq!(cli(&["train", "--data", "x", "--lr", "-1"]).0, 2);
}

#[test]
fn train_predict_eval_round_trip() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    let run_dir = tmp.path().join("run");
    assert_eq!(cli(&["synth", "--out", s(&data), "--per-class", "5", "--size", "32", "--seed", "3"]).0, 0);
    let (code, out, err) = cli(&["train", "--data", s(&data), "--epochs", "1", "--batch-size", "4", "--out", s(&run_dir)]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("epoch 1/1"));
    for f in ["weights.cxrw", "history.csv", "metrics.json", "config.resolved.json"] {
        assert!(run_dir.join(f).is_file(), "{f}");
    }
    let history = fs::read_to_string(run_dir.join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,train_acc,val_loss,val_acc\n1,"));
    cxrnet::cli::read_metrics(&run_dir.join("metrics.json")).unwrap();

    let weights = run_dir.join("weights.cxrw");
    let image = data.join("covid/00000.pgm");
    let (code, out, _) = cli(&["predict", "--image", s(&image), "--weights", s(&weights)]);
    assert_eq!(code, 0);
    let line = out.trim();
    assert!(line.starts_with("label=covid p=") || line.starts_with("label=normal p="), "{line}");
    let p: f64 = line.split("p=").nth(1).unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&p));
    // The threshold decides the label.
    for (t, want) in [(p.max(1e-6) * 0.5, "covid"), (((p + 1.0) / 2.0).min(0.999_999), "normal")] {
        if t > 0.0 && t < 1.0 && (t <= p) == (want == "covid") {
            let (_, out, _) = cli(&["predict", "--image", s(&image), "--weights", s(&weights), "--threshold", &t.to_string()]);
            assert!(out.starts_with(&format!("label={want}")), "{t}: {out}");
        }
    }
    assert_eq!(cli(&["predict", "--image", s(&tmp.path().join("none.pgm")), "--weights", s(&weights)]).0, 3);
    assert_eq!(cli(&["predict", "--image", s(&image), "--weights", s(&weights), "--threshold", "1.5"]).0, 2);

    let eval_dir = tmp.path().join("eval");
    let (code, out, _) = cli(&["eval", "--data", s(&data), "--weights", s(&weights), "--out", s(&eval_dir)]);
    assert_eq!(code, 0);
    let rows = ["Sensitivity", "Specificity", "Precision", "Negative Predictive Value", "False Positive Rate",
        "False Discovery Rate", "False Negative Rate", "Accuracy", "F1 Score", "Matthews Correlation Coefficient"];
    let table: Vec<&str> = out.lines().skip_while(|l| !l.starts_with("Measure")).skip(1).collect();
    assert_eq!(table.len(), 10);
    for (line, name) in table.iter().zip(rows) {
        assert!(line.starts_with(name), "{line}");
    }
    assert!(eval_dir.join("metrics.json").is_file());

    let mut bytes = fs::read(&weights).unwrap();
    bytes[0] = b'Z';
    let bad = tmp.path().join("bad.cxrw");
    fs::write(&bad, &bytes).unwrap();
    assert_eq!(cli(&["eval", "--data", s(&data), "--weights", s(&bad)]).0, 4);
    assert_eq!(cli(&["predict", "--image", s(&image), "--weights", s(&bad)]).0, 4);
    assert_eq!(cli(&["predict", "--image", s(&image), "--weights", s(&tmp.path().join("missing"))]).0, 4);
}

#[test]
fn augment_preview_outputs() {
    let tmp = TempDir::new().unwrap();
    let img = GrayImage::new(40, 30, (0..1200).map(|v| (v % 251) as u8).collect()).unwrap();
    let src = tmp.path().join("x.png");
    fs::write(&src, encode_png(&img)).unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        assert_eq!(cli(&["augment-preview", "--image", s(&src), "--seed", "4", "--count", "5", "--out", s(dir)]).0, 0);
    }
    let mut files: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    assert_eq!(files.len(), 6);
    assert_eq!(files.iter().filter(|f| f.ends_with(".pgm")).count(), 5);
    for f in &files {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let sidecar: serde_json::Value = serde_json::from_slice(&fs::read(a.join("augment_preview.json")).unwrap()).unwrap();
    let samples = sidecar["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 5);
    for e in samples {
        let angle = e["angle_degrees"].as_f64().unwrap();
        assert!((-30.0..=30.0).contains(&angle));
        assert!((0.8..=1.2).contains(&e["zoom"].as_f64().unwrap()));
    }
    assert_eq!(cli(&["augment-preview", "--image", s(&tmp.path().join("nope.png")), "--out", s(&a)]).0, 3);
}
