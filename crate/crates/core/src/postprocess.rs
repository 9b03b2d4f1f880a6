//! Anatomy-aware enhancement of raw segmentation output.
//!
//! * Disc and atrophy cannot overlap, so both maps are fused into a single
//!   per-pixel decision.
//! * Detachment predictions covering a large share of the image are
//!   promoted to the full image.
//! * The fovea is read off a segmentation map as the centroid of its
//!   largest blob, checked against the expected displacement from the
//!   optic disc, and replaced by a disc-relative estimate (or the image
//!   centre when no disc is visible) when missing or implausible.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::raster::{
    area_fraction, centroid, label_components, threshold, BinaryMask, ImageMeta, Point, ProbMap,
    ResolutionGroup,
};

pub const DEFAULT_TOLERANCE_K: f64 = 2.0;
pub const DEFAULT_DETACHMENT_FRACTION: f64 = 0.30;

/// Fovea-minus-disc-centroid displacement statistics for one resolution group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub mean_dx: f64,
    pub mean_dy: f64,
    pub sd_dx: f64,
    pub sd_dy: f64,
    /// Tolerance in standard deviations.
    pub k: f64,
}

impl GroupStats {
    pub fn new(mean_dx: f64, mean_dy: f64, sd_dx: f64, sd_dy: f64) -> Self {
        Self { mean_dx, mean_dy, sd_dx, sd_dy, k: DEFAULT_TOLERANCE_K }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.mean_dx, self.mean_dy, self.sd_dx, self.sd_dy, self.k];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("fovea statistics must be finite".into()));
        }
        if self.sd_dx < 0.0 || self.sd_dy < 0.0 || self.k < 0.0 {
            return Err(Error::Config(
                "standard deviations and k must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn mean_offset(&self) -> Point {
        Point::new(self.mean_dx, self.mean_dy)
    }
}

/// Per-resolution-group displacement statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FoveaStats {
    groups: BTreeMap<ResolutionGroup, GroupStats>,
}

impl FoveaStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails if the group is already present.
    pub fn insert(&mut self, group: ResolutionGroup, stats: GroupStats) -> Result<()> {
        stats.validate()?;
        if self.groups.contains_key(&group) {
            return Err(Error::Config(format!("duplicate resolution group {group}")));
        }
        self.groups.insert(group, stats);
        Ok(())
    }

    pub fn with_group(mut self, group: ResolutionGroup, stats: GroupStats) -> Result<Self> {
        self.insert(group, stats)?;
        Ok(self)
    }

    pub fn get(&self, group: ResolutionGroup) -> Result<&GroupStats> {
        self.groups
            .get(&group)
            .ok_or_else(|| Error::Config(format!("no fovea statistics for resolution group {group}")))
    }

    pub fn groups(&self) -> impl Iterator<Item = (&ResolutionGroup, &GroupStats)> {
        self.groups.iter()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// One labelled training image: fovea location and optic disc centroid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoveaSample {
    pub group: ResolutionGroup,
    pub fovea: Point,
    pub disc_centroid: Point,
}

/// Estimates per-group mean and sample standard deviation of the
/// fovea-minus-disc offset. Groups with a single sample get zero spread.
pub fn estimate_fovea_stats(samples: &[FoveaSample], k: f64) -> Result<FoveaStats> {
    let mut by_group: BTreeMap<ResolutionGroup, Vec<Point>> = BTreeMap::new();
    for s in samples {
        by_group.entry(s.group).or_default().push(s.fovea - s.disc_centroid);
    }
    let mut stats = FoveaStats::new();
    for (group, offsets) in by_group {
        let n = offsets.len() as f64;
        let mean_dx = offsets.iter().map(|p| p.x).sum::<f64>() / n;
        let mean_dy = offsets.iter().map(|p| p.y).sum::<f64>() / n;
        let (sd_dx, sd_dy) = if offsets.len() < 2 {
            (0.0, 0.0)
        } else {
            let vx = offsets.iter().map(|p| (p.x - mean_dx).powi(2)).sum::<f64>() / (n - 1.0);
            let vy = offsets.iter().map(|p| (p.y - mean_dy).powi(2)).sum::<f64>() / (n - 1.0);
            (vx.sqrt(), vy.sqrt())
        };
        stats.insert(group, GroupStats { mean_dx, mean_dy, sd_dx, sd_dy, k })?;
    }
    Ok(stats)
}

/// Disc and atrophy masks that never overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedSegmentation {
    pub disc: BinaryMask,
    pub atrophy: BinaryMask,
}

/// Per-pixel decision: disc wins ties with atrophy; a class must also
/// reach `t` to be assigned.
pub fn fuse_disc_atrophy(disc_p: &ProbMap, atrophy_p: &ProbMap, t: f64) -> Result<FusedSegmentation> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param(format!("threshold {t} outside [0,1]")));
    }
    let (w, h) = (disc_p.width(), disc_p.height());
    if (atrophy_p.width(), atrophy_p.height()) != (w, h) {
        return Err(Error::param(format!(
            "disc map is {w}x{h}, atrophy map is {}x{}",
            atrophy_p.width(),
            atrophy_p.height()
        )));
    }
    let mut disc = Vec::with_capacity(w * h);
    let mut atrophy = Vec::with_capacity(w * h);
    for (&d, &a) in disc_p.values().iter().zip(atrophy_p.values()) {
        disc.push(d >= a && d >= t);
        atrophy.push(a > d && a >= t);
    }
    Ok(FusedSegmentation {
        disc: BinaryMask::new(w, h, disc)?,
        atrophy: BinaryMask::new(w, h, atrophy)?,
    })
}

/// Replaces the mask with the full image when it covers at least
/// `frac_threshold` of it.
pub fn detachment_fix(det_mask: &BinaryMask, frac_threshold: f64) -> Result<BinaryMask> {
    if !(frac_threshold > 0.0 && frac_threshold <= 1.0) {
        return Err(Error::param(format!(
            "detachment fraction threshold {frac_threshold} outside (0,1]"
        )));
    }
    if area_fraction(det_mask) >= frac_threshold {
        BinaryMask::full(det_mask.width(), det_mask.height())
    } else {
        Ok(det_mask.clone())
    }
}

/// Filled disc of pixels within `radius` of `center`, clipped to the image.
pub fn rasterize_fovea(center: Point, radius: f64, w: usize, h: usize) -> Result<BinaryMask> {
    if !center.is_finite() {
        return Err(Error::param("fovea center must be finite"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::param(format!("radius must be positive, got {radius}")));
    }
    let mut mask = BinaryMask::empty(w, h)?;
    let r2 = radius * radius;
    let clip = |lo: f64, n: usize| lo.max(0.0).min(n as f64) as usize;
    let (x0, x1) = (clip((center.x - radius).floor(), w), clip((center.x + radius).ceil() + 1.0, w));
    let (y0, y1) = (clip((center.y - radius).floor(), h), clip((center.y + radius).ceil() + 1.0, h));
    for py in y0..y1 {
        let dy = py as f64 - center.y;
        for px in x0..x1 {
            let dx = px as f64 - center.x;
            if dx * dx + dy * dy <= r2 {
                mask.set(px, py, true);
            }
        }
    }
    Ok(mask)
}

/// Centroid of the largest connected blob at threshold `t`.
pub fn extract_fovea(fovea_p: &ProbMap, t: f64) -> Result<Option<Point>> {
    let mask = threshold(fovea_p, t)?;
    let labeling = label_components(&mask);
    Ok(labeling
        .largest()
        .and_then(|c| centroid(&labeling.component_mask(c.label))))
}

/// Componentwise closed-interval check of the fovea-minus-disc offset.
pub fn sanity_check_fovea(
    fovea: Point,
    disc_centroid: Point,
    stats: &FoveaStats,
    group: ResolutionGroup,
) -> Result<bool> {
    let g = stats.get(group)?;
    let d = fovea - disc_centroid;
    Ok((d.x - g.mean_dx).abs() <= g.k * g.sd_dx && (d.y - g.mean_dy).abs() <= g.k * g.sd_dy)
}

/// Disc centroid plus the group's mean offset, or the image centre when
/// there is no disc.
pub fn fallback_fovea(
    disc_centroid: Option<Point>,
    stats: &FoveaStats,
    group: ResolutionGroup,
    w: usize,
    h: usize,
) -> Result<Point> {
    match disc_centroid {
        Some(disc) => Ok(disc + stats.get(group)?.mean_offset()),
        None => Ok(Point::new(w as f64 / 2.0, h as f64 / 2.0)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoveaSource {
    /// Centroid of the predicted blob.
    Prediction,
    /// Disc centroid plus mean offset.
    DiscFallback,
    /// Image centre.
    CenterFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoveaEstimate {
    pub point: Point,
    pub source: FoveaSource,
}

pub fn localize_fovea_detailed(
    fovea_p: &ProbMap,
    disc_mask: &BinaryMask,
    stats: &FoveaStats,
    meta: &ImageMeta,
    t: f64,
) -> Result<FoveaEstimate> {
    let dims = (meta.width, meta.height);
    if (fovea_p.width(), fovea_p.height()) != dims || (disc_mask.width(), disc_mask.height()) != dims
    {
        return Err(Error::param(format!(
            "{}: fovea map {}x{}, disc mask {}x{}, image {}x{}",
            meta.id,
            fovea_p.width(),
            fovea_p.height(),
            disc_mask.width(),
            disc_mask.height(),
            meta.width,
            meta.height
        )));
    }
    let group = meta.group();
    let disc = centroid(disc_mask);
    let extracted = extract_fovea(fovea_p, t)?;

    let accept = match (extracted, disc) {
        (None, _) => false,
        (Some(_), None) => true,
        (Some(f), Some(d)) => sanity_check_fovea(f, d, stats, group)?,
    };
    if accept {
        return Ok(FoveaEstimate {
            point: extracted.expect("accepted fovea exists"),
            source: FoveaSource::Prediction,
        });
    }
    let point = fallback_fovea(disc, stats, group, meta.width, meta.height)?;
    let source = if disc.is_some() { FoveaSource::DiscFallback } else { FoveaSource::CenterFallback };
    Ok(FoveaEstimate { point, source })
}

/// Fovea coordinates from a segmentation map with disc-based sanity checks.
pub fn localize_fovea(
    fovea_p: &ProbMap,
    disc_mask: &BinaryMask,
    stats: &FoveaStats,
    meta: &ImageMeta,
    t: f64,
) -> Result<Point> {
    localize_fovea_detailed(fovea_p, disc_mask, stats, meta, t).map(|e| e.point)
}
