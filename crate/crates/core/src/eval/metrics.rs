use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfusionMetrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub f1: f64,
    /// Reported as 1 when there are no positives; see `tpr_defined`.
    pub tpr: f64,
    /// Reported as 1 when there are no negatives; see `tnr_defined`.
    pub tnr: f64,
    pub tpr_defined: bool,
    pub tnr_defined: bool,
}

fn check(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::invalid("no scores to evaluate"));
    }
    if scores.len() != labels.len() {
        return Err(Error::shape(format!("{} labels", scores.len()), format!("{} labels", labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    Ok(())
}

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    (pos, labels.len() - pos)
}

/// Counts and rates with prediction `score ≥ threshold`.
pub fn confusion_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ConfusionMetrics> {
    check(scores, labels)?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if a + b == 0 { None } else { Some(a as f64 / (a + b) as f64) };
    let precision = ratio(tp, fp).unwrap_or(0.0);
    let tpr = ratio(tp, fn_);
    let tnr = ratio(tn, fp);
    let recall = tpr.unwrap_or(0.0);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(ConfusionMetrics {
        tp,
        fp,
        fn_,
        tn,
        precision,
        f1,
        tpr: tpr.unwrap_or(1.0),
        tnr: tnr.unwrap_or(1.0),
        tpr_defined: tpr.is_some(),
        tnr_defined: tnr.is_some(),
    })
}

/// Indices sorted by descending score, grouped into blocks of equal score.
fn tie_blocks(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match blocks.last_mut() {
            Some(b) if scores[b[0]] == scores[i] => b.push(i),
            _ => blocks.push(vec![i]),
        }
    }
    blocks
}

/// Area under the ROC curve as the Mann–Whitney statistic
/// `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)`, via midranks.
pub fn roc_area(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check(scores, labels)?;
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("ROC area needs both classes"));
    }
    let mut blocks = tie_blocks(scores);
    blocks.reverse();
    let (mut rank, mut pos_rank_sum) = (0.0, 0.0);
    for b in blocks {
        let mid = rank + (b.len() as f64 + 1.0) / 2.0;
        pos_rank_sum += mid * b.iter().filter(|&&i| labels[i] == 1).count() as f64;
        rank += b.len() as f64;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// ROC points `(fpr, tpr)` from a threshold sweep over distinct scores,
/// from `(0, 0)` to `(1, 1)`.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>> {
    check(scores, labels)?;
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("ROC curve needs both classes"));
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut pts = vec![(0.0, 0.0)];
    for b in tie_blocks(scores) {
        let pos = b.iter().filter(|&&i| labels[i] == 1).count();
        tp += pos;
        fp += b.len() - pos;
        pts.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(pts)
}

/// Average precision without interpolation: `Σ_k (R_k − R_{k−1}) P_k` over
/// thresholds at each distinct score. Tied scores form one step, evaluated
/// with the precision at the end of the tie block (pessimistic within ties).
pub fn pr_area(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check(scores, labels)?;
    let (n_pos, _) = class_counts(labels);
    if n_pos == 0 {
        return Err(Error::invalid("PR area needs at least one positive"));
    }
    let (mut tp, mut seen, mut area) = (0usize, 0usize, 0.0);
    for b in tie_blocks(scores) {
        let pos = b.iter().filter(|&&i| labels[i] == 1).count();
        tp += pos;
        seen += b.len();
        area += (pos as f64 / n_pos as f64) * (tp as f64 / seen as f64);
    }
    Ok(area)
}

/// PR points `(recall, precision)` per distinct-score threshold, starting at
/// `(0, 1)`.
pub fn pr_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>> {
    check(scores, labels)?;
    let (n_pos, _) = class_counts(labels);
    if n_pos == 0 {
        return Err(Error::invalid("PR curve needs at least one positive"));
    }
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut pts = vec![(0.0, 1.0)];
    for b in tie_blocks(scores) {
        tp += b.iter().filter(|&&i| labels[i] == 1).count();
        seen += b.len();
        pts.push((tp as f64 / n_pos as f64, tp as f64 / seen as f64));
    }
    Ok(pts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub f1: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub tnr_defined: bool,
    pub roc_area: f64,
    pub pr_area: f64,
    #[serde(skip)]
    pub roc_points: Vec<(f64, f64)>,
    #[serde(skip)]
    pub pr_points: Vec<(f64, f64)>,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Full report at `threshold`; needs both classes.
pub fn evaluate_scores(scores: &[f64], labels: &[u8], threshold: f64) -> Result<EvalReport> {
    let cm = confusion_metrics(scores, labels, threshold)?;
    let (n_pos, n_neg) = class_counts(labels);
    Ok(EvalReport {
        f1: cm.f1,
        tpr: cm.tpr,
        tnr: cm.tnr,
        tnr_defined: cm.tnr_defined,
        roc_area: roc_area(scores, labels)?,
        pr_area: pr_area(scores, labels)?,
        roc_points: roc_curve(scores, labels)?,
        pr_points: pr_curve(scores, labels)?,
        n_pos,
        n_neg,
    })
}
