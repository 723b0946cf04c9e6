//! Evaluation reports: a fixed-width text table and a JSON record.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use pollen_core::features::DescriptorKind;
use pollen_core::learn::{accuracy, confusion_matrix, per_class_f1, weighted_f1, Kernel, ModelParams};

use crate::Result;

/// "RBF SVM" style method name.
pub fn method_name(p: &ModelParams) -> &'static str {
    match p {
        ModelParams::Svm(s) => match s.kernel {
            Kernel::Linear => "LINEAR SVM",
            Kernel::Rbf { .. } => "RBF SVM",
        },
        ModelParams::Mlp(_) => "MLP",
        ModelParams::Forest(_) => "RANDOM FOREST",
        ModelParams::Boost(_) => "ADABOOST",
    }
}

/// "G = 0.1  C = 1000" style parameter summary.
pub fn parameter_summary(p: &ModelParams) -> String {
    match p {
        ModelParams::Svm(s) => match s.kernel {
            Kernel::Linear => format!("C = {}", s.c),
            Kernel::Rbf { gamma } => format!("G = {gamma}  C = {}", s.c),
        },
        ModelParams::Mlp(m) => format!("a = {}  EST = {}", m.alpha, m.epochs),
        ModelParams::Forest(f) => format!("EST = {}", f.n_estimators),
        ModelParams::Boost(b) => format!("LR = {}  EST = {}", b.learning_rate, b.n_estimators),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub parameters: String,
    pub descriptor: DescriptorKind,
    pub accuracy: f64,
    pub weighted_f1: f64,
    /// Per class: (F1, support).
    pub per_class: BTreeMap<u8, (f64, usize)>,
    pub confusion_classes: Vec<u8>,
    pub confusion: Vec<Vec<usize>>,
    pub train_size: usize,
    pub test_size: usize,
    pub split_seed: Option<u64>,
}

impl EvalRow {
    pub fn compute(
        params: &ModelParams,
        descriptor: DescriptorKind,
        y_true: &[u8],
        y_pred: &[u8],
        train_size: usize,
        split_seed: Option<u64>,
    ) -> Result<Self> {
        let (confusion_classes, confusion) = confusion_matrix(y_true, y_pred)?;
        Ok(EvalRow {
            method: method_name(params).to_string(),
            parameters: parameter_summary(params),
            descriptor,
            accuracy: accuracy(y_true, y_pred)?,
            weighted_f1: weighted_f1(y_true, y_pred)?,
            per_class: per_class_f1(y_true, y_pred)?,
            confusion_classes,
            confusion,
            train_size,
            test_size: y_true.len(),
            split_seed,
        })
    }
}

/// One table per descriptor, rows in input order.
pub fn render_table(rows: &[EvalRow]) -> String {
    let mut out = String::new();
    for kind in [DescriptorKind::Hog, DescriptorKind::Lbp] {
        let group: Vec<&EvalRow> = rows.iter().filter(|r| r.descriptor == kind).collect();
        if group.is_empty() {
            continue;
        }
        let pw = group.iter().map(|r| r.parameters.len()).max().unwrap_or(0).max(10);
        let name = kind.name().to_uppercase();
        let _ = writeln!(out, "{:<14} {:<pw$}  {name}", "Methods", "Parameters");
        let _ = writeln!(out, "{:<14} {:<pw$}  {:<9} {}", "", "", "Accuracy", "F1 score");
        for r in group {
            let _ = writeln!(
                out,
                "{:<14} {:<pw$}  {:<9.4} {:.4}",
                r.method, r.parameters, r.accuracy, r.weighted_f1
            );
        }
    }
    out
}

/// Per-class F1 and the confusion matrix of one row.
pub fn render_details(r: &EvalRow) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "train {} / test {}", r.train_size, r.test_size);
    for (c, (f1, support)) in &r.per_class {
        let _ = writeln!(out, "class {c}: F1 {f1:.4} (support {support})");
    }
    let _ = write!(out, "confusion (rows true, cols predicted)\n     ");
    for c in &r.confusion_classes {
        let _ = write!(out, "{c:>6}");
    }
    out.push('\n');
    for (c, row) in r.confusion_classes.iter().zip(&r.confusion) {
        let _ = write!(out, "{c:>5}");
        for n in row {
            let _ = write!(out, "{n:>6}");
        }
        out.push('\n');
    }
    out
}
