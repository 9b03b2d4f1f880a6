//! Run-level evaluation over a prediction directory and a ground-truth
//! directory with the same layout:
//!
//! ```text
//! classification.csv      id,score   (ground truth: score is the 0/1 label)
//! fovea.csv               id,x,y
//! disc/<id>.png           masks, one per image
//! atrophy/<id>.png
//! detachment/<id>.png
//! ```
//!
//! Every part is optional; a task is evaluated when its ground truth exists.
//! Ids are paired by name. Ground-truth ids without a prediction are listed
//! in [`EvalReport::missing`] and the report covers the intersection.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{list_by_stem, read_coords, read_mask, read_scores, Polarity};
use crate::metrics::{auc, euclidean, overlap_counts, weighted_score, Confusion, OverlapCounts};
use crate::raster::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LesionClass {
    Disc,
    Atrophy,
    Detachment,
}

impl LesionClass {
    pub const ALL: [LesionClass; 3] = [LesionClass::Disc, LesionClass::Atrophy, LesionClass::Detachment];

    pub fn name(self) -> &'static str {
        match self {
            LesionClass::Disc => "disc",
            LesionClass::Atrophy => "atrophy",
            LesionClass::Detachment => "detachment",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub polarity: Polarity,
    /// Foreground pixels needed for a predicted mask to count as a detection.
    pub min_area: usize,
    pub dice_weight: f64,
    pub f1_weight: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { polarity: Polarity::ZeroForeground, min_area: 1, dice_weight: 0.75, f1_weight: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    /// Mean Dice over images with non-empty ground truth.
    pub dice_mean: Option<f64>,
    pub f1_detection: f64,
    /// `dice_weight * dice_mean + f1_weight * f1_detection`, when Dice exists.
    pub weighted: Option<f64>,
    pub n_images: usize,
    /// Images left out of the Dice mean because their ground truth is empty.
    pub n_excluded: usize,
    pub confusion: Confusion,
}

impl ClassReport {
    /// Aggregates per-image overlap counts given in a fixed (sorted-id) order.
    pub fn from_counts(counts: &[OverlapCounts], cfg: &EvalConfig) -> ClassReport {
        let mut dice_sum = 0.0;
        let mut n_dice = 0usize;
        let mut confusion = Confusion::default();
        for c in counts {
            if c.gt > 0 {
                dice_sum += 2.0 * c.intersection as f64 / (c.pred + c.gt) as f64;
                n_dice += 1;
            }
            match (c.pred >= cfg.min_area.max(1), c.gt > 0) {
                (true, true) => confusion.tp += 1,
                (true, false) => confusion.fp += 1,
                (false, true) => confusion.fn_ += 1,
                (false, false) => confusion.tn += 1,
            }
        }
        let dice_mean = (n_dice > 0).then(|| dice_sum / n_dice as f64);
        let f1_detection = confusion.f1();
        ClassReport {
            dice_mean,
            f1_detection,
            weighted: dice_mean.map(|d| weighted_score(d, f1_detection, cfg.dice_weight, cfg.f1_weight)),
            n_images: counts.len(),
            n_excluded: counts.len() - n_dice,
            confusion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub auc: Option<f64>,
    pub n_classification: usize,
    pub fovea_mean_euclidean: Option<f64>,
    pub n_fovea: usize,
    pub classes: BTreeMap<LesionClass, ClassReport>,
    /// `<task>/<id>` for every ground-truth entry without a prediction.
    pub missing: Vec<String>,
}

impl EvalReport {
    pub fn warning(&self) -> bool {
        !self.missing.is_empty()
    }

    /// Human-readable summary.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        let mut s = String::new();
        let _ = writeln!(s, "PM detection        AUC        {}  (n={})", opt(self.auc), self.n_classification);
        let _ = writeln!(
            s,
            "Fovea localization  Euclidean  {}  (n={})",
            self.fovea_mean_euclidean.map_or_else(|| "n/a".into(), |v| format!("{v:.2}")),
            self.n_fovea
        );
        for (class, r) in &self.classes {
            let _ = writeln!(
                s,
                "{:<19} Dice {}  F1 {:.4}  weighted {}  (n={}, excluded={}, tp={} fp={} fn={})",
                class.name(),
                opt(r.dice_mean),
                r.f1_detection,
                opt(r.weighted),
                r.n_images,
                r.n_excluded,
                r.confusion.tp,
                r.confusion.fp,
                r.confusion.fn_
            );
        }
        if self.warning() {
            let _ = writeln!(s, "WARNING: {} ground-truth entries without prediction", self.missing.len());
            for m in &self.missing {
                let _ = writeln!(s, "  missing {m}");
            }
        }
        s
    }

    /// `key=value` lines, one metric per line, stable order.
    pub fn to_key_values(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| v.to_string());
        let mut s = String::new();
        let _ = writeln!(s, "auc={}", opt(self.auc));
        let _ = writeln!(s, "auc.n={}", self.n_classification);
        let _ = writeln!(s, "fovea.mean_euclidean={}", opt(self.fovea_mean_euclidean));
        let _ = writeln!(s, "fovea.n={}", self.n_fovea);
        for (class, r) in &self.classes {
            let n = class.name();
            let _ = writeln!(s, "{n}.dice_mean={}", opt(r.dice_mean));
            let _ = writeln!(s, "{n}.f1_detection={}", r.f1_detection);
            let _ = writeln!(s, "{n}.weighted={}", opt(r.weighted));
            let _ = writeln!(s, "{n}.n_images={}", r.n_images);
            let _ = writeln!(s, "{n}.n_excluded={}", r.n_excluded);
        }
        let _ = writeln!(s, "warning={}", self.warning());
        for m in &self.missing {
            let _ = writeln!(s, "missing={m}");
        }
        s
    }
}

/// Pairs ground-truth entries with predictions; returns matched pairs in
/// id order and appends missing ids to `missing`.
fn pair_up<'a, T, U>(
    task: &str,
    gt: &'a BTreeMap<String, T>,
    pred: &'a BTreeMap<String, U>,
    missing: &mut Vec<String>,
) -> Vec<(&'a str, &'a T, &'a U)> {
    let mut pairs = Vec::with_capacity(gt.len());
    for (id, g) in gt {
        match pred.get(id) {
            Some(p) => pairs.push((id.as_str(), g, p)),
            None => missing.push(format!("{task}/{id}")),
        }
    }
    pairs
}

fn classification(pred_dir: &Path, gt_dir: &Path, report: &mut EvalReport) -> Result<()> {
    let gt_path = gt_dir.join("classification.csv");
    if !gt_path.is_file() {
        return Ok(());
    }
    let gt = read_scores(&gt_path)?;
    if let Some((id, v)) = gt.iter().find(|(_, &v)| v != 0.0 && v != 1.0) {
        return Err(Error::format(&gt_path, format!("label {v} for `{id}` is not 0 or 1")));
    }
    let pred_path = pred_dir.join("classification.csv");
    let pred = if pred_path.is_file() { read_scores(&pred_path)? } else { BTreeMap::new() };
    let pairs = pair_up("classification", &gt, &pred, &mut report.missing);
    let scores: Vec<f64> = pairs.iter().map(|(_, _, &s)| s).collect();
    let labels: Vec<bool> = pairs.iter().map(|(_, &g, _)| g == 1.0).collect();
    report.n_classification = pairs.len();
    report.auc = match auc(&scores, &labels) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(())
}

fn fovea(pred_dir: &Path, gt_dir: &Path, report: &mut EvalReport) -> Result<()> {
    let gt_path = gt_dir.join("fovea.csv");
    if !gt_path.is_file() {
        return Ok(());
    }
    let gt = read_coords(&gt_path)?;
    let pred_path = pred_dir.join("fovea.csv");
    let pred = if pred_path.is_file() { read_coords(&pred_path)? } else { BTreeMap::new() };
    let pairs = pair_up("fovea", &gt, &pred, &mut report.missing);
    report.n_fovea = pairs.len();
    if !pairs.is_empty() {
        let sum: f64 = pairs.iter().map(|(_, &g, &p): &(&str, &Point, &Point)| euclidean(p, g)).sum();
        report.fovea_mean_euclidean = Some(sum / pairs.len() as f64);
    }
    Ok(())
}

fn masks(
    class: LesionClass,
    pred_dir: &Path,
    gt_dir: &Path,
    cfg: &EvalConfig,
    report: &mut EvalReport,
) -> Result<()> {
    let gt_sub = gt_dir.join(class.name());
    if !gt_sub.is_dir() {
        return Ok(());
    }
    const EXT: &[&str] = &["png", "bmp", "tif", "tiff", "jpg", "jpeg"];
    let gt = list_by_stem(&gt_sub, EXT)?;
    let pred_sub = pred_dir.join(class.name());
    let pred = if pred_sub.is_dir() { list_by_stem(&pred_sub, EXT)? } else { BTreeMap::new() };
    let pairs = pair_up(class.name(), &gt, &pred, &mut report.missing);
    let counts = pairs
        .par_iter()
        .map(|(_, g, p)| {
            let gm = read_mask(g, cfg.polarity)?;
            let pm = read_mask(p, cfg.polarity)?;
            overlap_counts(&pm, &gm).map_err(|e| Error::format(p.as_path(), e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    report.classes.insert(class, ClassReport::from_counts(&counts, cfg));
    Ok(())
}

pub fn evaluate_run(pred_dir: &Path, gt_dir: &Path, cfg: &EvalConfig) -> Result<EvalReport> {
    if !gt_dir.is_dir() {
        return Err(Error::io(gt_dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
    }
    if !pred_dir.is_dir() {
        return Err(Error::io(pred_dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
    }
    let mut report = EvalReport::default();
    classification(pred_dir, gt_dir, &mut report)?;
    fovea(pred_dir, gt_dir, &mut report)?;
    for class in LesionClass::ALL {
        masks(class, pred_dir, gt_dir, cfg, &mut report)?;
    }
    Ok(report)
}
