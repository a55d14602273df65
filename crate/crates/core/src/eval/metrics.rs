use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

impl Confusion {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| (a + b > 0).then(|| a as f64 / (a + b) as f64);
        Confusion {
            tp,
            fp,
            tn,
            fn_,
            precision: ratio(tp, fp),
            sensitivity: ratio(tp, fn_),
            specificity: ratio(tn, fp),
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_aligned(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

/// Predicted positive iff `score >= threshold`.
pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Confusion> {
    check_aligned(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(Confusion::from_counts(tp, fp, tn, fn_))
}

/// Twice the Mann–Whitney U statistic: 2 per (positive, negative) pair the
/// positive wins, 1 per tie.
fn doubled_wins(scores: &[f64], labels: &[bool]) -> u64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut wins, mut neg_below) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let pos = order[i..j].iter().filter(|&&k| labels[k]).count() as u64;
        let neg = (j - i) as u64 - pos;
        wins += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    wins
}

/// Probability that a random positive outscores a random negative, ties
/// counted one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_aligned(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass("roc_auc"));
    }
    Ok(doubled_wins(scores, labels) as f64 / (2 * pos * neg) as f64)
}

/// Descending score; ties keep input order.
fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Average precision with step interpolation over the ranking by descending
/// score. Tied scores are ranked by input position, so callers pass
/// subjects sorted by id.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_aligned(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y).count();
    if pos == 0 {
        return Err(Error::SingleClass("pr_auc"));
    }
    let npos = pos as f64;
    let (mut tp, mut prev_recall, mut ap) = (0usize, 0.0, 0.0);
    for (k, &i) in ranking(scores).iter().enumerate() {
        if labels[i] {
            tp += 1;
        }
        let recall = tp as f64 / npos;
        let precision = tp as f64 / (k + 1) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
    pub threshold: f64,
}

/// (threshold, tp, fp) after admitting every score >= threshold, one entry
/// per distinct score in descending order.
fn operating_points(scores: &[f64], labels: &[bool]) -> Vec<(f64, usize, usize)> {
    let order = ranking(scores);
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    for (n, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last = n + 1 == order.len() || scores[order[n + 1]] != scores[i];
        if last {
            out.push((scores[i], tp, fp));
        }
    }
    out
}

/// ROC points from (0, 0) at threshold +inf to (1, 1).
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    check_aligned(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass("roc_curve"));
    }
    let mut out = alloc::vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    out.extend(operating_points(scores, labels).into_iter().map(|(t, tp, fp)| RocPoint {
        fpr: fp as f64 / neg as f64,
        tpr: tp as f64 / pos as f64,
        threshold: t,
    }));
    Ok(out)
}

/// Precision-recall points, one per distinct threshold, descending.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<PrPoint>> {
    check_aligned(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y).count();
    if pos == 0 {
        return Err(Error::SingleClass("pr_curve"));
    }
    Ok(operating_points(scores, labels)
        .into_iter()
        .map(|(t, tp, fp)| PrPoint {
            recall: tp as f64 / pos as f64,
            precision: tp as f64 / (tp + fp) as f64,
            threshold: t,
        })
        .collect())
}
