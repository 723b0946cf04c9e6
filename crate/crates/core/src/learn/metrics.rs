use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::{Error, Result};

fn check(y_true: &[u8], y_pred: &[u8]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch);
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

pub fn accuracy(y_true: &[u8], y_pred: &[u8]) -> Result<f64> {
    check(y_true, y_pred)?;
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

/// Sorted union of the labels in both vectors and the matrix
/// `m[true][pred]` over that label order.
pub fn confusion_matrix(y_true: &[u8], y_pred: &[u8]) -> Result<(Vec<u8>, Vec<Vec<usize>>)> {
    check(y_true, y_pred)?;
    let mut labels: Vec<u8> = y_true.iter().chain(y_pred).copied().collect();
    labels.sort_unstable();
    labels.dedup();
    let pos = |l: u8| labels.binary_search(&l).unwrap_or(0);
    let mut m = alloc::vec![alloc::vec![0usize; labels.len()]; labels.len()];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        m[pos(t)][pos(p)] += 1;
    }
    Ok((labels, m))
}

/// F1 and support for every label appearing in either vector.
pub fn per_class_f1(y_true: &[u8], y_pred: &[u8]) -> Result<BTreeMap<u8, (f64, usize)>> {
    let (labels, m) = confusion_matrix(y_true, y_pred)?;
    let mut out = BTreeMap::new();
    for (k, &label) in labels.iter().enumerate() {
        let tp = m[k][k] as f64;
        let support: usize = m[k].iter().sum();
        let predicted: usize = m.iter().map(|row| row[k]).sum();
        let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let recall = if support > 0 { tp / support as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        out.insert(label, (f1, support));
    }
    Ok(out)
}

/// Mean of per-class F1 weighted by true-class support.
pub fn weighted_f1(y_true: &[u8], y_pred: &[u8]) -> Result<f64> {
    let per_class = per_class_f1(y_true, y_pred)?;
    let total: f64 = per_class.values().map(|&(f1, s)| f1 * s as f64).sum();
    Ok(total / y_true.len() as f64)
}
