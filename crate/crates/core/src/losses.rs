//! Forward values of the segmentation and classification training losses.
//!
//! These mirror what the training code minimizes so values can be compared
//! against an external framework. No gradients are computed.

use crate::error::{Error, Result};

pub const BCE_EPSILON: f64 = 1e-7;
pub const DEFAULT_DICE_SMOOTH: f64 = 1.0;

fn check_pair(p: &[f64], n_labels: usize) -> Result<()> {
    if p.is_empty() {
        return Err(Error::param("loss input is empty"));
    }
    if p.len() != n_labels {
        return Err(Error::param(format!("{} predictions but {} labels", p.len(), n_labels)));
    }
    Ok(())
}

fn check_probabilities(p: &[f64]) -> Result<()> {
    match p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(Error::param(format!("probability {v} outside [0,1]"))),
        None => Ok(()),
    }
}

/// Mean binary cross-entropy with probabilities clipped to `[ε, 1 − ε]`.
pub fn bce(p: &[f64], y: &[bool]) -> Result<f64> {
    check_pair(p, y.len())?;
    check_probabilities(p)?;
    let sum: f64 = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            if y {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum();
    Ok(-sum / p.len() as f64)
}

/// Mean categorical cross-entropy over `n` rows of `n_classes`
/// probabilities (row-major), clipped like [`bce`].
pub fn categorical_cross_entropy(probs: &[f64], n_classes: usize, labels: &[usize]) -> Result<f64> {
    if n_classes == 0 || probs.len() != labels.len() * n_classes {
        return Err(Error::param(format!(
            "{} probabilities do not form {} rows of {n_classes} classes",
            probs.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::param("loss input is empty"));
    }
    check_probabilities(probs)?;
    let mut sum = 0.0;
    for (row, &label) in probs.chunks_exact(n_classes).zip(labels) {
        let p = *row
            .get(label)
            .ok_or_else(|| Error::param(format!("label {label} >= {n_classes} classes")))?;
        sum += p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON).ln();
    }
    Ok(-sum / labels.len() as f64)
}

/// `1 − (2 Σ p·y + smooth) / (Σ p + Σ y + smooth)`.
///
/// With `smooth = 0` and nothing predicted or labelled the loss is 0.
pub fn dice_loss(p: &[f64], y: &[bool], smooth: f64) -> Result<f64> {
    check_pair(p, y.len())?;
    check_probabilities(p)?;
    if !(smooth >= 0.0 && smooth.is_finite()) {
        return Err(Error::param(format!("smooth must be non-negative, got {smooth}")));
    }
    let (mut inter, mut sum_p, mut sum_y) = (0.0, 0.0, 0.0);
    for (&p, &y) in p.iter().zip(y) {
        sum_p += p;
        if y {
            inter += p;
            sum_y += 1.0;
        }
    }
    let denom = sum_p + sum_y + smooth;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - (2.0 * inter + smooth) / denom)
}

/// Lovász extension of the Jaccard loss evaluated at `errors`, where `fg`
/// marks ground-truth foreground. Zero when there is no foreground.
///
/// Errors are visited in decreasing order; each contributes its value times
/// the increase in `1 − |fg ∖ S| / |fg ∪ S|` from adding it to the set `S`
/// of larger errors.
pub fn lovasz_extension(errors: &[f64], fg: &[bool]) -> Result<f64> {
    if errors.len() != fg.len() {
        return Err(Error::param(format!("{} errors but {} labels", errors.len(), fg.len())));
    }
    if let Some(e) = errors.iter().find(|e| e.is_nan()) {
        return Err(Error::param(format!("error value {e} is not a number")));
    }
    let gts = fg.iter().filter(|&&g| g).count();
    if gts == 0 {
        return Ok(0.0);
    }
    let mut order: Vec<usize> = (0..errors.len()).collect();
    order.sort_by(|&a, &b| errors[b].total_cmp(&errors[a]));

    let gts = gts as f64;
    let (mut cum_fg, mut cum_bg) = (0.0, 0.0);
    let mut prev_jaccard = 0.0;
    let mut loss = 0.0;
    for &i in &order {
        if fg[i] {
            cum_fg += 1.0;
        } else {
            cum_bg += 1.0;
        }
        let jaccard = 1.0 - (gts - cum_fg) / (gts + cum_bg);
        loss += errors[i].max(0.0) * (jaccard - prev_jaccard);
        prev_jaccard = jaccard;
    }
    Ok(loss)
}

/// Binary Lovász hinge: hinge errors `max(0, 1 − s·(2y − 1))` fed to
/// [`lovasz_extension`].
pub fn lovasz_binary(scores: &[f64], y: &[bool]) -> Result<f64> {
    check_pair(scores, y.len())?;
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::param(format!("score {s} is not finite")));
    }
    let errors: Vec<f64> = scores
        .iter()
        .zip(y)
        .map(|(&s, &y)| {
            let sign = if y { 1.0 } else { -1.0 };
            (1.0 - s * sign).max(0.0)
        })
        .collect();
    lovasz_extension(&errors, y)
}

/// Multi-class Lovász-Softmax: per class, the Lovász extension of the
/// absolute errors `|[y = c] − p_c|`, averaged over classes present in
/// `labels`. `probs` holds `n_classes` probabilities per pixel, row-major.
pub fn lovasz_softmax(probs: &[f64], n_classes: usize, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::param("loss input is empty"));
    }
    if n_classes == 0 || probs.len() != labels.len() * n_classes {
        return Err(Error::param(format!(
            "{} probabilities do not form {} rows of {n_classes} classes",
            probs.len(),
            labels.len()
        )));
    }
    check_probabilities(probs)?;
    if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::param(format!("label {l} >= {n_classes} classes")));
    }
    let mut total = 0.0;
    let mut present = 0usize;
    for c in 0..n_classes {
        let fg: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        if !fg.iter().any(|&f| f) {
            continue;
        }
        let errors: Vec<f64> = probs
            .chunks_exact(n_classes)
            .zip(&fg)
            .map(|(row, &f)| ((f as u8 as f64) - row[c]).abs())
            .collect();
        total += lovasz_extension(&errors, &fg)?;
        present += 1;
    }
    Ok(total / present as f64)
}
