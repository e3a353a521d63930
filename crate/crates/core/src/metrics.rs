//! Confusion matrix and the ten derived performance measures.
//!
//! A measure whose denominator is zero is reported as undefined (`None`),
//! never coerced to 0.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionMatrix { tp, fp, tn, fn_ }
    }

    /// Tallies predictions against ground truth with `positive` as the
    /// positive class.
    pub fn from_labels(pred: &[Label], truth: &[Label], positive: Label) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::Shape(format!("{} predictions for {} labels", pred.len(), truth.len())));
        }
        if pred.is_empty() {
            return Err(Error::Data("confusion matrix of zero samples".into()));
        }
        let mut cm = ConfusionMatrix::default();
        for (&p, &t) in pred.iter().zip(truth) {
            match (p == positive, t == positive) {
                (true, true) => cm.tp += 1,
                (true, false) => cm.fp += 1,
                (false, false) => cm.tn += 1,
                (false, true) => cm.fn_ += 1,
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The same counts seen from the other class as positive.
    pub fn swap_classes(&self) -> Self {
        ConfusionMatrix { tp: self.tn, fp: self.fn_, tn: self.tp, fn_: self.fp }
    }

    /// Exact fractions `(numerator, denominator)` of the seven rate measures,
    /// in report order: sensitivity, specificity, precision, npv, fpr, fdr, fnr.
    pub fn exact_rates(&self) -> [(u64, u64); 7] {
        let ConfusionMatrix { tp, fp, tn, fn_ } = *self;
        [
            (tp, tp + fn_),
            (tn, fp + tn),
            (tp, tp + fp),
            (tn, tn + fn_),
            (fp, fp + tn),
            (fp, fp + tp),
            (fn_, fn_ + tp),
        ]
    }
}

/// Confusion matrix of `pred` vs `truth` with covid as the positive class.
pub fn confusion(pred: &[Label], truth: &[Label]) -> Result<ConfusionMatrix> {
    ConfusionMatrix::from_labels(pred, truth, Label::Covid)
}

/// The ten measures; `None` marks an undefined value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub npv: Option<f64>,
    pub fpr: Option<f64>,
    pub fdr: Option<f64>,
    pub fnr: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub mcc: Option<f64>,
}

/// Report keys in display order, with their long names and derivations.
pub const MEASURES: [(&str, &str, &str); 10] = [
    ("sensitivity", "Sensitivity", "TPR = TP / (TP + FN)"),
    ("specificity", "Specificity", "SPC = TN / (FP + TN)"),
    ("precision", "Precision", "PPV = TP / (TP + FP)"),
    ("npv", "Negative Predictive Value", "NPV = TN / (TN + FN)"),
    ("fpr", "False Positive Rate", "FPR = FP / (FP + TN)"),
    ("fdr", "False Discovery Rate", "FDR = FP / (FP + TP)"),
    ("fnr", "False Negative Rate", "FNR = FN / (FN + TP)"),
    ("accuracy", "Accuracy", "ACC = (TP + TN) / (P + N)"),
    ("f1", "F1 Score", "F1 = 2TP / (2TP + FP + FN)"),
    (
        "mcc",
        "Matthews Correlation Coefficient",
        "MCC = (TP*TN - FP*FN) / sqrt((TP+FP)(TP+FN)(TN+FP)(TN+FN))",
    ),
];

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den != 0).then(|| num as f64 / den as f64)
}

/// Output layout for [`MetricsReport::render`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Text,
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let ConfusionMatrix { tp, fp, tn, fn_ } = *cm;
        let [sensitivity, specificity, precision, npv, fpr, fdr, fnr] =
            cm.exact_rates().map(|(n, d)| ratio(n, d));
        // Each factor under the radical is rooted separately so the product
        // never overflows.
        let mcc = if tp + fp == 0 || tp + fn_ == 0 || tn + fp == 0 || tn + fn_ == 0 {
            None
        } else {
            let num = tp as f64 * tn as f64 - fp as f64 * fn_ as f64;
            let den = Float::sqrt((tp + fp) as f64)
                * Float::sqrt((tp + fn_) as f64)
                * Float::sqrt((tn + fp) as f64)
                * Float::sqrt((tn + fn_) as f64);
            Some((num / den).clamp(-1.0, 1.0))
        };
        MetricsReport {
            sensitivity,
            specificity,
            precision,
            npv,
            fpr,
            fdr,
            fnr,
            accuracy: ratio(tp + tn, cm.total()),
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
            mcc,
        }
    }

    /// Values in display order.
    pub fn values(&self) -> [Option<f64>; 10] {
        [
            self.sensitivity,
            self.specificity,
            self.precision,
            self.npv,
            self.fpr,
            self.fdr,
            self.fnr,
            self.accuracy,
            self.f1,
            self.mcc,
        ]
    }

    fn from_values(v: [Option<f64>; 10]) -> Self {
        let [sensitivity, specificity, precision, npv, fpr, fdr, fnr, accuracy, f1, mcc] = v;
        MetricsReport { sensitivity, specificity, precision, npv, fpr, fdr, fnr, accuracy, f1, mcc }
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
            ReportFormat::Text => self.to_text(),
        }
    }

    /// Header of the ten keys, then one row of full-precision values.
    pub fn to_csv(&self) -> String {
        let header: Vec<&str> = MEASURES.iter().map(|m| m.0).collect();
        let row: Vec<String> = self
            .values()
            .iter()
            .map(|v| v.map_or_else(|| String::from("NA"), |x| format!("{x:?}")))
            .collect();
        format!("{}\n{}\n", header.join(","), row.join(","))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Format(format!("metrics csv: {m}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty input"))?;
        let keys: Vec<&str> = MEASURES.iter().map(|m| m.0).collect();
        if header.split(',').collect::<Vec<_>>() != keys {
            return Err(bad("unexpected header"));
        }
        let row = lines.next().ok_or_else(|| bad("missing value row"))?;
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != 10 {
            return Err(bad("expected 10 values"));
        }
        let mut values = [None; 10];
        for (slot, cell) in values.iter_mut().zip(cells) {
            *slot = match cell {
                "NA" => None,
                s => Some(s.parse::<f64>().map_err(|_| bad("unparsable value"))?),
            };
        }
        Ok(Self::from_values(values))
    }

    /// JSON object with the ten stable keys; undefined values are `null`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("metrics json: {e}")))
    }

    /// Table with one row per measure, values to four decimals.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:<34}{:<10}{}\n", "Measure", "Value", "Derivations");
        for ((_, name, formula), v) in MEASURES.iter().zip(self.values()) {
            let value = v.map_or_else(|| String::from("NA"), |x| format!("{x:.4}"));
            out.push_str(&format!("{name:<34}{value:<10}{formula}\n"));
        }
        out
    }
}

/// Shorthand for [`MetricsReport::from_confusion`].
pub fn compute_metrics(cm: &ConfusionMatrix) -> MetricsReport {
    MetricsReport::from_confusion(cm)
}
