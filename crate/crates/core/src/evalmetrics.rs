//! Four-class confusion matrix, accuracy, macro one-vs-rest specificity and
//! macro one-vs-rest AUC (Mann-Whitney, ties counted one half).

use std::cmp::Ordering;

use crate::data::NUM_CLASSES;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }
}

fn check_classes(xs: &[usize], what: &str) -> Result<()> {
    match xs.iter().find(|&&c| c >= NUM_CLASSES) {
        Some(c) => Err(Error::Argument(format!("{what} contain class {c} outside 0..{NUM_CLASSES}"))),
        None => Ok(()),
    }
}

pub fn confusion(preds: &[usize], labels: &[usize]) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    check_classes(preds, "predictions")?;
    check_classes(labels, "labels")?;
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in preds.iter().zip(labels) {
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Argument("accuracy of an empty confusion matrix".into()));
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// Per-class `TN / (TN + FP)` with class `c` as the positive class; `None`
/// when that class has no negatives.
pub fn class_specificity(cm: &ConfusionMatrix, class: usize) -> Option<f64> {
    let total = cm.total();
    let tp = cm.counts[class][class];
    let fp = cm.col_sum(class) - tp;
    let fn_ = cm.row_sum(class) - tp;
    let tn = total - tp - fp - fn_;
    let denom = tn + fp;
    (denom > 0).then(|| tn as f64 / denom as f64)
}

/// Macro mean of [`class_specificity`] over active classes.
///
/// A class is active when it occurs among the true labels or the
/// predictions; classes that never occur, or have no negatives, are left out.
pub fn specificity(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::Argument("specificity of an empty confusion matrix".into()));
    }
    let per: Vec<f64> = (0..NUM_CLASSES)
        .filter(|&c| cm.row_sum(c) + cm.col_sum(c) > 0)
        .filter_map(|c| class_specificity(cm, c))
        .collect();
    if per.is_empty() {
        return Err(Error::UndefinedMetric(
            "no class has any negatives; specificity undefined".into(),
        ));
    }
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Mann-Whitney AUC of `scores` with `positive[i]` marking positives.
/// `None` without at least one positive and one negative.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    // Sum of mid-ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid_rank * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Per-class one-vs-rest AUCs (`None` for classes lacking positives or negatives).
pub fn auc_per_class(scores: &Tensor, labels: &[usize]) -> Result<[Option<f64>; NUM_CLASSES]> {
    let n = match *scores.shape() {
        [n, NUM_CLASSES] => n,
        ref s => {
            return Err(Error::Shape(format!(
                "scores must be N x {NUM_CLASSES}, got {s:?}"
            )))
        }
    };
    if labels.len() != n {
        return Err(Error::Argument(format!("{n} score rows for {} labels", labels.len())));
    }
    check_classes(labels, "labels")?;
    let mut out = [None; NUM_CLASSES];
    for (c, slot) in out.iter_mut().enumerate() {
        let col: Vec<f64> = (0..n).map(|i| scores.at2(i, c)).collect();
        let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        *slot = binary_auc(&col, &pos);
    }
    Ok(out)
}

/// Macro one-vs-rest AUC over classes with both positives and negatives.
pub fn auc_ovr(scores: &Tensor, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Argument("auc of an empty set".into()));
    }
    let per: Vec<f64> = auc_per_class(scores, labels)?.into_iter().flatten().collect();
    if per.is_empty() {
        return Err(Error::UndefinedMetric(
            "no class has both positives and negatives; AUC undefined".into(),
        ));
    }
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Index of the largest entry per row (first on ties).
pub fn argmax_rows(scores: &Tensor) -> Vec<usize> {
    let cols = scores.shape()[1];
    scores
        .data()
        .chunks_exact(cols)
        .map(|row| (0..cols).fold(0, |b, i| if row[i] > row[b] { i } else { b }))
        .collect()
}
