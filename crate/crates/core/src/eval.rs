//! Accuracy and confidence analyses over per-input predictions.

use crate::error::{usage, Result};

pub fn accuracy(predictions: &[usize], labels: &[u8]) -> f64 {
    assert_eq!(predictions.len(), labels.len());
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| **p == **l as usize)
        .count();
    hits as f64 / labels.len() as f64
}

/// Input indices sorted by ascending confidence; ties keep input order.
pub fn confidence_order(confidence: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..confidence.len()).collect();
    order.sort_by(|&a, &b| confidence[a].total_cmp(&confidence[b]));
    order
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    /// 0-based position in ascending confidence order.
    pub rank: usize,
    pub input: usize,
    pub confidence: f64,
    /// Accuracy over every input ranked at or above `rank`.
    pub accuracy_above: f64,
}

pub fn confidence_curve(confidence: &[f64], correct: &[bool]) -> Vec<CurveRow> {
    assert_eq!(confidence.len(), correct.len());
    let order = confidence_order(confidence);
    let q = order.len();
    let mut rows = Vec::with_capacity(q);
    let mut hits = 0usize;
    for (k, &d) in order.iter().enumerate().rev() {
        hits += correct[d] as usize;
        rows.push(CurveRow {
            rank: k,
            input: d,
            confidence: confidence[d],
            accuracy_above: hits as f64 / (q - k) as f64,
        });
    }
    rows.reverse();
    rows
}

fn slice_accuracy(order: &[usize], correct: &[bool]) -> f64 {
    if order.is_empty() {
        return 0.0;
    }
    order.iter().filter(|&&d| correct[d]).count() as f64 / order.len() as f64
}

/// Accuracy over the `ceil(fraction * q)` most confident inputs.
pub fn top_fraction_accuracy(confidence: &[f64], correct: &[bool], fraction: f64) -> f64 {
    let order = confidence_order(confidence);
    let n = ((fraction * order.len() as f64).ceil() as usize).min(order.len());
    slice_accuracy(&order[order.len() - n..], correct)
}

/// Accuracy over the `ceil(fraction * q)` least confident inputs.
pub fn bottom_fraction_accuracy(confidence: &[f64], correct: &[bool], fraction: f64) -> f64 {
    let order = confidence_order(confidence);
    let n = ((fraction * order.len() as f64).ceil() as usize).min(order.len());
    slice_accuracy(&order[..n], correct)
}

/// Top-decile accuracy minus bottom-decile accuracy.
pub fn decile_gap(confidence: &[f64], correct: &[bool]) -> f64 {
    top_fraction_accuracy(confidence, correct, 0.1) - bottom_fraction_accuracy(confidence, correct, 0.1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InspectEntry {
    pub input: usize,
    pub label: usize,
    pub prediction: usize,
    pub confidence: f64,
}

/// The `k` least and `k` most confident inputs, each list in ascending
/// confidence order.
pub fn inspect(
    confidence: &[f64],
    predictions: &[usize],
    labels: &[u8],
    k: usize,
) -> Result<(Vec<InspectEntry>, Vec<InspectEntry>)> {
    let q = confidence.len();
    if 2 * k > q {
        return usage(format!("k = {k} exceeds half of the {q} evaluated inputs"));
    }
    let order = confidence_order(confidence);
    let entry = |&d: &usize| InspectEntry {
        input: d,
        label: labels[d] as usize,
        prediction: predictions[d],
        confidence: confidence[d],
    };
    Ok((
        order[..k].iter().map(entry).collect(),
        order[q - k..].iter().map(entry).collect(),
    ))
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let order = confidence_order(values);
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0;
        for &d in &order[i..=j] {
            ranks[d] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_suffix_accuracy() {
        let conf = [3.0, 1.0, 2.0, 4.0];
        let correct = [true, false, false, true];
        let rows = confidence_curve(&conf, &correct);
        let acc: Vec<f64> = rows.iter().map(|r| r.accuracy_above).collect();
        assert_eq!(acc, vec![0.5, 2.0 / 3.0, 1.0, 1.0]);
        assert_eq!(rows[0].input, 1);
        let last = rows.last().unwrap().accuracy_above;
        assert!(last == 0.0 || last == 1.0);
    }

    #[test]
    fn calibrated_member_reaches_one() {
        // confidence equals the correctness indicator
        let correct = [false, true, false, true, true, false];
        let conf: Vec<f64> = correct.iter().map(|&c| c as u8 as f64).collect();
        let rows = confidence_curve(&conf, &correct);
        let first_perfect = rows.iter().position(|r| r.accuracy_above == 1.0).unwrap();
        assert_eq!(first_perfect, 3);
        assert!(rows[..3].iter().all(|r| r.accuracy_above < 1.0));
    }

    #[test]
    fn fractions_and_gap() {
        let conf: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let correct: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        assert_eq!(top_fraction_accuracy(&conf, &correct, 0.05), 1.0);
        assert_eq!(bottom_fraction_accuracy(&conf, &correct, 0.1), 0.0);
        assert_eq!(decile_gap(&conf, &correct), 1.0);
    }

    #[test]
    fn inspect_partitions() {
        let conf = [5.0, 1.0, 3.0, 2.0];
        let preds = [0, 1, 2, 3];
        let labels = [0u8, 0, 2, 2];
        let (lo, hi) = inspect(&conf, &preds, &labels, 0).unwrap();
        assert!(lo.is_empty() && hi.is_empty());
        let (lo, hi) = inspect(&conf, &preds, &labels, 2).unwrap();
        let mut all: Vec<usize> = lo.iter().chain(&hi).map(|e| e.input).collect();
        assert_eq!(lo.iter().map(|e| e.input).collect::<Vec<_>>(), vec![1, 3]);
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3]);
        assert!(inspect(&conf, &preds, &labels, 3).is_err());
    }

    #[test]
    fn spearman_basics() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&a, &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&a, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&a, &[1.0; 4]), 0.0);
        assert_eq!(average_ranks(&[2.0, 1.0, 2.0]), vec![1.5, 0.0, 1.5]);
    }

    #[test]
    fn accuracy_counts() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 0, 3]), 2.0 / 3.0);
        assert_eq!(accuracy(&[], &[]), 0.0);
    }
}
