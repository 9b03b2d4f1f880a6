//! Challenge metrics: ROC AUC, Dice, detection F1 and Euclidean distance.

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Point};

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::param(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::param(format!("score {s} is not a number")));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs at least one positive and one negative label".into(),
        ));
    }
    Ok((n_pos, n_neg))
}

/// Area under the ROC curve as the Mann-Whitney statistic; tied
/// positive/negative pairs count one half.
///
/// Computed from mid-ranks in `O(n log n)`.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (n_pos, n_neg) = check_scores(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of doubled mid-ranks of the positives keeps everything integral.
    let mut pos_rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j, mid-rank (i+1+j)/2
        let mid2 = (i + 1 + j) as u128;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k]).count() as u128;
        pos_rank_sum2 += pos_in_group * mid2;
        i = j;
    }
    let n_pos = n_pos as u128;
    let u2 = pos_rank_sum2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2 * n_pos * n_neg as u128) as f64)
}

/// `(false positive rate, true positive rate)` at every distinct score
/// threshold, from `(0, 0)` to `(1, 1)`.
pub fn roc_points(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    let (n_pos, n_neg) = check_scores(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OverlapCounts {
    pub intersection: usize,
    pub pred: usize,
    pub gt: usize,
}

pub fn overlap_counts(pred: &BinaryMask, gt: &BinaryMask) -> Result<OverlapCounts> {
    if !pred.same_size(gt) {
        return Err(Error::param(format!(
            "prediction is {}x{}, ground truth is {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let mut c = OverlapCounts::default();
    for (&p, &g) in pred.bits().iter().zip(gt.bits()) {
        c.pred += p as usize;
        c.gt += g as usize;
        c.intersection += (p && g) as usize;
    }
    Ok(c)
}

/// `2|P ∩ G| / (|P| + |G|)`, or `None` when the ground truth is empty
/// (such images are excluded from the Dice mean).
pub fn dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<Option<f64>> {
    let c = overlap_counts(pred, gt)?;
    if c.gt == 0 {
        return Ok(None);
    }
    Ok(Some(2.0 * c.intersection as f64 / (c.pred + c.gt) as f64))
}

/// Intersection over union; `None` when both masks are empty.
pub fn iou(pred: &BinaryMask, gt: &BinaryMask) -> Result<Option<f64>> {
    let c = overlap_counts(pred, gt)?;
    let union = c.pred + c.gt - c.intersection;
    Ok((union > 0).then(|| c.intersection as f64 / union as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_presence(pred: &[bool], gt: &[bool]) -> Result<Self> {
        if pred.len() != gt.len() {
            return Err(Error::param(format!(
                "{} predictions but {} ground-truth entries",
                pred.len(),
                gt.len()
            )));
        }
        let mut c = Confusion::default();
        for (&p, &g) in pred.iter().zip(gt) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    /// `2TP / (2TP + FP + FN)`, 1.0 when there is nothing to detect and
    /// nothing was detected.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

/// Image-level presence F1.
pub fn detection_f1(pred_present: &[bool], gt_present: &[bool]) -> Result<f64> {
    Confusion::from_presence(pred_present, gt_present).map(|c| c.f1())
}

pub fn euclidean(p: Point, q: Point) -> f64 {
    let (dx, dy) = (p.x - q.x, p.y - q.y);
    (dx * dx + dy * dy).sqrt()
}

/// Mean distance over `(prediction, ground truth)` pairs; `None` if empty.
pub fn mean_euclidean(pairs: &[(Point, Point)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    Some(pairs.iter().map(|&(p, q)| euclidean(p, q)).sum::<f64>() / pairs.len() as f64)
}

/// `dice_weight * dice + f1_weight * f1`.
pub fn weighted_score(dice: f64, f1: f64, dice_weight: f64, f1_weight: f64) -> f64 {
    dice_weight * dice + f1_weight * f1
}
