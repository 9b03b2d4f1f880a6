//! Raster, probability-map and mask types plus the pixel-level algebra the
//! rest of the crate builds on.
//!
//! Pixel centers sit at integer coordinates: `x` is the column index and `y`
//! the row index, origin top-left. Everything is stored row-major.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// 8-bit image grid with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param(format!("raster size {width}x{height} is empty")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::param(format!("raster must have 1 or 3 channels, got {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::param(format!(
                "raster data has {} samples, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Luma (ITU-R BT.601) for RGB, identity for gray.
    pub fn to_gray(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| {
                let l = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
                l.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        Raster { width: self.width, height: self.height, channels: 1, data }
    }

    /// Extracts one channel as a single-channel raster.
    pub fn channel(&self, c: usize) -> Raster {
        let data = self.data.iter().skip(c).step_by(self.channels).copied().collect();
        Raster { width: self.width, height: self.height, channels: 1, data }
    }

    /// Interleaves single-channel planes of identical size.
    pub fn from_planes(planes: &[Raster]) -> Result<Raster> {
        let first = planes.first().ok_or_else(|| Error::param("no planes"))?;
        let (w, h) = (first.width, first.height);
        if planes.iter().any(|p| p.width != w || p.height != h || p.channels != 1) {
            return Err(Error::param("planes must be single-channel with equal size"));
        }
        let n = planes.len();
        let mut data = vec![0u8; w * h * n];
        for (c, p) in planes.iter().enumerate() {
            for (i, &v) in p.data.iter().enumerate() {
                data[i * n + c] = v;
            }
        }
        Raster::new(w, h, n, data)
    }
}

/// Single-channel per-pixel probability field, every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ProbMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param(format!("map size {width}x{height} is empty")));
        }
        if values.len() != width * height {
            return Err(Error::param(format!(
                "map has {} values, expected {}",
                values.len(),
                width * height
            )));
        }
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param(format!(
                "map value {} at index {i} is outside [0,1]",
                values[i]
            )));
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    /// Skips range validation; callers guarantee every value is in `[0, 1]`.
    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        debug_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
        Self { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Copies the `w`×`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<ProbMap> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::param(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut values = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let row = y * self.width;
            values.extend_from_slice(&self.values[row + x0..row + x0 + w]);
        }
        Ok(ProbMap::from_raw(w, h, values))
    }
}

/// Boolean pixel grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param(format!("mask size {width}x{height} is empty")));
        }
        if bits.len() != width * height {
            return Err(Error::param(format!(
                "mask has {} bits, expected {}",
                bits.len(),
                width * height
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![true; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    /// Number of foreground pixels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_size(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        if !self.same_size(other) {
            return Err(Error::param(format!(
                "mask size mismatch: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect();
        Ok(BinaryMask { width: self.width, height: self.height, bits })
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.same_size(other) && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Iterates `(x, y)` of foreground pixels in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldAngle {
    Deg30,
    Deg45,
}

impl FieldAngle {
    /// The two acquisition modes in use have distinct resolutions.
    pub fn from_resolution(width: usize, height: usize) -> Option<Self> {
        match (width, height) {
            (1444, 1444) => Some(FieldAngle::Deg30),
            (2124, 2156) => Some(FieldAngle::Deg45),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Centering {
    Macula,
    Disc,
}

/// Resolution-group key, rendered as `WxH`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResolutionGroup {
    pub width: usize,
    pub height: usize,
}

impl ResolutionGroup {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }
}

impl fmt::Display for ResolutionGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl FromStr for ResolutionGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("resolution group `{s}` is not of the form WxH"));
        let (w, h) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        let width: usize = w.parse().map_err(|_| bad())?;
        let height: usize = h.parse().map_err(|_| bad())?;
        if width == 0 || height == 0 {
            return Err(bad());
        }
        Ok(Self { width, height })
    }
}

/// Image identity and acquisition attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMeta {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub angle: Option<FieldAngle>,
    pub centering: Option<Centering>,
}

impl ImageMeta {
    pub fn new(id: impl Into<String>, width: usize, height: usize) -> Self {
        Self {
            id: id.into(),
            width,
            height,
            angle: FieldAngle::from_resolution(width, height),
            centering: None,
        }
    }

    pub fn group(&self) -> ResolutionGroup {
        ResolutionGroup::new(self.width, self.height)
    }
}

/// Marks every pixel whose value is `>= t`.
pub fn threshold(map: &ProbMap, t: f64) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param(format!("threshold {t} outside [0,1]")));
    }
    let bits = map.values.iter().map(|&v| v >= t).collect();
    Ok(BinaryMask { width: map.width, height: map.height, bits })
}

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Component {
    /// 1-based label in raster-scan discovery order.
    pub label: u32,
    pub pixel_count: usize,
    pub bbox: BoundingBox,
}

/// Label image together with its component table.
#[derive(Debug, Clone)]
pub struct Labeling {
    width: usize,
    height: usize,
    /// 0 is background.
    labels: Vec<u32>,
    /// Sorted by `pixel_count` descending, ties by label ascending.
    pub components: Vec<Component>,
}

impl Labeling {
    pub fn label_at(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn component_mask(&self, label: u32) -> BinaryMask {
        let bits = self.labels.iter().map(|&l| l == label && label != 0).collect();
        BinaryMask { width: self.width, height: self.height, bits }
    }

    pub fn largest(&self) -> Option<&Component> {
        self.components.first()
    }
}

/// 8-connected component labeling.
pub fn label_components(mask: &BinaryMask) -> Labeling {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; w * h];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    let mut next = 0u32;

    for start in 0..w * h {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        let (sx, sy) = (start % w, start / w);
        let mut bbox = BoundingBox { x0: sx, y0: sy, x1: sx, y1: sy };
        let mut count = 0usize;

        while let Some(i) = queue.pop_front() {
            count += 1;
            let (x, y) = (i % w, i / w);
            bbox.x0 = bbox.x0.min(x);
            bbox.x1 = bbox.x1.max(x);
            bbox.y0 = bbox.y0.min(y);
            bbox.y1 = bbox.y1.max(y);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if mask.bits[j] && labels[j] == 0 {
                        labels[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
        components.push(Component { label: next, pixel_count: count, bbox });
    }

    components.sort_by(|a, b| b.pixel_count.cmp(&a.pixel_count).then(a.label.cmp(&b.label)));
    Labeling { width: w, height: h, labels, components }
}

/// Components sorted by pixel count, largest first.
pub fn connected_components(mask: &BinaryMask) -> Vec<Component> {
    label_components(mask).components
}

/// Mean of foreground pixel-center coordinates; `None` for an empty mask.
pub fn centroid(mask: &BinaryMask) -> Option<Point> {
    let (mut sx, mut sy, mut n) = (0u64, 0u64, 0u64);
    for (x, y) in mask.foreground() {
        sx += x as u64;
        sy += y as u64;
        n += 1;
    }
    (n > 0).then(|| Point::new(sx as f64 / n as f64, sy as f64 / n as f64))
}

pub fn area_fraction(mask: &BinaryMask) -> f64 {
    mask.count() as f64 / (mask.width * mask.height) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from_rows(rows: &[&str]) -> BinaryMask {
        let h = rows.len();
        let w = rows[0].len();
        BinaryMask::from_fn(w, h, |x, y| rows[y].as_bytes()[x] == b'#').unwrap()
    }

    #[test]
    fn threshold_examples() {
        let zeros = ProbMap::filled(4, 3, 0.0).unwrap();
        assert!(threshold(&zeros, 0.5).unwrap().is_empty());
        let ones = ProbMap::filled(4, 3, 1.0).unwrap();
        assert_eq!(threshold(&ones, 0.5).unwrap().count(), 12);
        let m = ProbMap::new(3, 1, vec![0.3, 0.5, 0.7]).unwrap();
        assert_eq!(threshold(&m, 0.5).unwrap().bits(), &[false, true, true]);
    }

    #[test]
    fn threshold_rejects_out_of_range() {
        let m = ProbMap::filled(2, 2, 0.5).unwrap();
        assert!(matches!(threshold(&m, 1.5), Err(Error::Parameter(_))));
        assert!(matches!(threshold(&m, -0.1), Err(Error::Parameter(_))));
        assert!(threshold(&m, f64::NAN).is_err());
    }

    #[test]
    fn probmap_rejects_bad_values() {
        assert!(ProbMap::new(2, 1, vec![0.1, 1.2]).is_err());
        assert!(ProbMap::new(2, 1, vec![0.1, f64::NAN]).is_err());
        assert!(ProbMap::new(2, 2, vec![0.1]).is_err());
        assert!(ProbMap::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn components_examples() {
        assert!(connected_components(&BinaryMask::empty(5, 5).unwrap()).is_empty());

        let two = mask_from_rows(&[
            "###.....",
            "###.....",
            "###..###",
            ".....###",
            ".....###",
        ]);
        let comps = connected_components(&two);
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| c.pixel_count == 9));
        assert_eq!(comps[0].bbox, BoundingBox { x0: 0, y0: 0, x1: 2, y1: 2 });
        assert_eq!(comps[1].bbox, BoundingBox { x0: 5, y0: 2, x1: 7, y1: 4 });

        let diag = mask_from_rows(&["#.", ".#"]);
        assert_eq!(connected_components(&diag).len(), 1);
    }

    #[test]
    fn components_sorted_by_size() {
        let m = mask_from_rows(&["#..##", "...##", "#...."]);
        let comps = connected_components(&m);
        assert_eq!(comps.iter().map(|c| c.pixel_count).collect::<Vec<_>>(), vec![4, 1, 1]);
        assert!(comps[1].label < comps[2].label);
    }

    #[test]
    fn centroid_examples() {
        let mut m = BinaryMask::empty(30, 30).unwrap();
        assert_eq!(centroid(&m), None);
        m.set(10, 20, true);
        assert_eq!(centroid(&m), Some(Point::new(10.0, 20.0)));

        let block = BinaryMask::from_fn(10, 10, |x, y| (4..=5).contains(&x) && (6..=7).contains(&y))
            .unwrap();
        assert_eq!(centroid(&block), Some(Point::new(4.5, 6.5)));
    }

    #[test]
    fn area_fraction_examples() {
        assert_eq!(area_fraction(&BinaryMask::empty(10, 10).unwrap()), 0.0);
        assert_eq!(area_fraction(&BinaryMask::full(10, 10).unwrap()), 1.0);
        let m = BinaryMask::from_fn(10, 10, |x, y| x < 5 && y < 5).unwrap();
        assert_eq!(area_fraction(&m), 0.25);
    }

    #[test]
    fn resolution_group_roundtrip() {
        let g: ResolutionGroup = "2124x2156".parse().unwrap();
        assert_eq!(g, ResolutionGroup::new(2124, 2156));
        assert_eq!(g.to_string(), "2124x2156");
        assert!("2124".parse::<ResolutionGroup>().is_err());
        assert!("0x5".parse::<ResolutionGroup>().is_err());
        let meta = ImageMeta::new("a", 1444, 1444);
        assert_eq!(meta.group().to_string(), "1444x1444");
        assert_eq!(meta.angle, Some(FieldAngle::Deg30));
    }

    #[test]
    fn raster_planes_roundtrip() {
        let r = Raster::new(2, 1, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let planes: Vec<_> = (0..3).map(|c| r.channel(c)).collect();
        assert_eq!(planes[1].data(), &[2, 5]);
        assert_eq!(Raster::from_planes(&planes).unwrap(), r);
    }
}
