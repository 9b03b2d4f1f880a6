//! File formats.
//!
//! * **PMAP** probability maps: ASCII `PMAP`, then little-endian `u32`
//!   width, height and channel count, then `width * height * channels`
//!   little-endian IEEE-754 `f32` values, row-major with channels
//!   interleaved per pixel.
//! * **Masks**: 8-bit single-channel PNG. With the default
//!   [`Polarity::ZeroForeground`], 0 marks the structure and 255 the
//!   background; reading treats values below 128 as 0.
//! * **Coordinates**: CSV `id,x,y`, x = column, y = row, origin top-left.
//! * **Scores**: CSV `id,score`.
//! * **Fovea statistics**: key = value sections, one `[WxH]` section per
//!   resolution group with `mean_dx`, `mean_dy`, `sd_dx`, `sd_dy` and
//!   optional `k` (default 2).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::postprocess::{FoveaStats, GroupStats, DEFAULT_TOLERANCE_K};
use crate::raster::{BinaryMask, Point, ProbMap, Raster, ResolutionGroup};

pub const PMAP_MAGIC: &[u8; 4] = b"PMAP";
const PMAP_HEADER_LEN: usize = 16;

/// Serializes a single-channel map.
pub fn encode_pmap(map: &ProbMap) -> Vec<u8> {
    encode_pmap_channels(std::slice::from_ref(map)).expect("single map is consistent")
}

/// Serializes maps of equal size as interleaved channels.
pub fn encode_pmap_channels(maps: &[ProbMap]) -> Result<Vec<u8>> {
    let first = maps.first().ok_or_else(|| Error::param("no channels to encode"))?;
    let (w, h) = (first.width(), first.height());
    if maps.iter().any(|m| m.width() != w || m.height() != h) {
        return Err(Error::param("PMAP channels must share one size"));
    }
    let to_u32 = |v: usize| {
        u32::try_from(v).map_err(|_| Error::param(format!("dimension {v} exceeds u32")))
    };
    let mut out = Vec::with_capacity(PMAP_HEADER_LEN + 4 * w * h * maps.len());
    out.extend_from_slice(PMAP_MAGIC);
    out.extend_from_slice(&to_u32(w)?.to_le_bytes());
    out.extend_from_slice(&to_u32(h)?.to_le_bytes());
    out.extend_from_slice(&to_u32(maps.len())?.to_le_bytes());
    for i in 0..w * h {
        for m in maps {
            out.extend_from_slice(&(m.values()[i] as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses a PMAP buffer into one map per channel. `origin` only labels errors.
pub fn decode_pmap_channels(bytes: &[u8], origin: &Path) -> Result<Vec<ProbMap>> {
    if bytes.len() < PMAP_HEADER_LEN || &bytes[..4] != PMAP_MAGIC {
        return Err(Error::format(origin, "missing PMAP header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (w, h, c) = (word(4), word(8), word(12));
    if w == 0 || h == 0 || c == 0 {
        return Err(Error::format(origin, format!("degenerate size {w}x{h}x{c}")));
    }
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(c))
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(PMAP_HEADER_LEN))
        .ok_or_else(|| Error::format(origin, "size overflow"))?;
    if bytes.len() != expected {
        return Err(Error::format(
            origin,
            format!("expected {expected} bytes for {w}x{h}x{c}, found {}", bytes.len()),
        ));
    }
    let mut planes = vec![Vec::with_capacity(w * h); c];
    for (i, chunk) in bytes[PMAP_HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::format(
                origin,
                format!("value {v} at pixel {} outside [0,1]", i / c),
            ));
        }
        planes[i % c].push(v);
    }
    planes.into_iter().map(|p| ProbMap::new(w, h, p)).collect()
}

pub fn decode_pmap(bytes: &[u8], origin: &Path) -> Result<ProbMap> {
    let mut maps = decode_pmap_channels(bytes, origin)?;
    if maps.len() != 1 {
        return Err(Error::format(
            origin,
            format!("expected 1 channel, found {}", maps.len()),
        ));
    }
    Ok(maps.remove(0))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_pmap(path: impl AsRef<Path>) -> Result<ProbMap> {
    let path = path.as_ref();
    decode_pmap(&read_bytes(path)?, path)
}

pub fn read_pmap_channels(path: impl AsRef<Path>) -> Result<Vec<ProbMap>> {
    let path = path.as_ref();
    decode_pmap_channels(&read_bytes(path)?, path)
}

pub fn write_pmap(path: impl AsRef<Path>, map: &ProbMap) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pmap(map))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarity {
    /// Value 0 is foreground, 255 background.
    #[default]
    ZeroForeground,
    /// Nonzero (255) is foreground.
    NonzeroForeground,
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" | "foreground=0" => Ok(Polarity::ZeroForeground),
            "nonzero" | "foreground=255" => Ok(Polarity::NonzeroForeground),
            _ => Err(Error::param(format!("unknown polarity `{s}` (use zero or nonzero)"))),
        }
    }
}

impl Polarity {
    fn is_foreground(self, v: u8) -> bool {
        match self {
            Polarity::ZeroForeground => v < 128,
            Polarity::NonzeroForeground => v >= 128,
        }
    }

    fn encode(self, fg: bool) -> u8 {
        match (self, fg) {
            (Polarity::ZeroForeground, true) | (Polarity::NonzeroForeground, false) => 0,
            _ => 255,
        }
    }
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

fn save_image(path: &Path, img: &DynamicImage) -> Result<()> {
    img.save(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
}

pub fn read_mask(path: impl AsRef<Path>, polarity: Polarity) -> Result<BinaryMask> {
    let path = path.as_ref();
    let gray = open_image(path)?.to_luma8();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let bits = gray.as_raw().iter().map(|&v| polarity.is_foreground(v)).collect();
    BinaryMask::new(w, h, bits)
}

pub fn mask_to_gray(mask: &BinaryMask, polarity: Polarity) -> GrayImage {
    let data = mask.bits().iter().map(|&b| polarity.encode(b)).collect();
    ImageBuffer::from_raw(mask.width() as u32, mask.height() as u32, data)
        .expect("buffer matches mask size")
}

pub fn write_mask(path: impl AsRef<Path>, mask: &BinaryMask, polarity: Polarity) -> Result<()> {
    let img = DynamicImage::ImageLuma8(mask_to_gray(mask, polarity));
    save_image(path.as_ref(), &img)
}

/// Loads an image as gray (for gray sources) or RGB; alpha is dropped.
pub fn read_raster(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let img = open_image(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        Raster::new(w, h, 3, img.to_rgb8().into_raw())
    } else {
        Raster::new(w, h, 1, img.to_luma8().into_raw())
    }
}

pub fn raster_to_image(raster: &Raster) -> DynamicImage {
    let (w, h) = (raster.width() as u32, raster.height() as u32);
    let data = raster.data().to_vec();
    if raster.channels() == 1 {
        DynamicImage::ImageLuma8(ImageBuffer::<Luma<u8>, _>::from_raw(w, h, data).unwrap())
    } else {
        DynamicImage::ImageRgb8(ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, data).unwrap())
    }
}

/// Writes PNG (or whatever format the extension selects).
pub fn write_raster(path: impl AsRef<Path>, raster: &Raster) -> Result<()> {
    save_image(path.as_ref(), &raster_to_image(raster))
}

#[derive(Debug, Deserialize)]
struct CoordRow {
    id: String,
    x: f64,
    y: f64,
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    id: String,
    score: f64,
}

fn read_csv<R, T>(path: &Path, header: &[&str], mut convert: impl FnMut(R) -> Result<(String, T)>) -> Result<BTreeMap<String, T>>
where
    R: for<'de> Deserialize<'de>,
{
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let found = reader.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(Error::format(
            path,
            format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut out = BTreeMap::new();
    for (line, row) in reader.deserialize::<R>().enumerate() {
        let row = row.map_err(|e| Error::format(path, format!("row {}: {e}", line + 2)))?;
        let (id, value) = convert(row)?;
        if out.insert(id.clone(), value).is_some() {
            return Err(Error::format(path, format!("duplicate id `{id}`")));
        }
    }
    Ok(out)
}

pub fn read_coords(path: impl AsRef<Path>) -> Result<BTreeMap<String, Point>> {
    let path = path.as_ref();
    read_csv(path, &["id", "x", "y"], |r: CoordRow| {
        let p = Point::new(r.x, r.y);
        if !p.is_finite() {
            return Err(Error::format(path, format!("non-finite coordinates for `{}`", r.id)));
        }
        Ok((r.id, p))
    })
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let path = path.as_ref();
    read_csv(path, &["id", "score"], |r: ScoreRow| {
        if !(0.0..=1.0).contains(&r.score) {
            return Err(Error::format(path, format!("score {} for `{}` outside [0,1]", r.score, r.id)));
        }
        Ok((r.id, r.score))
    })
}

/// Renders `id,x,y` rows in the order given.
pub fn format_coords<'a>(rows: impl IntoIterator<Item = (&'a str, Point)>) -> String {
    let mut out = String::from("id,x,y\n");
    for (id, p) in rows {
        writeln!(out, "{id},{},{}", p.x, p.y).unwrap();
    }
    out
}

pub fn format_scores<'a>(rows: impl IntoIterator<Item = (&'a str, f64)>) -> String {
    let mut out = String::from("id,score\n");
    for (id, s) in rows {
        writeln!(out, "{id},{s}").unwrap();
    }
    out
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write_bytes(path.as_ref(), text.as_bytes())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroupStats {
    mean_dx: f64,
    mean_dy: f64,
    sd_dx: f64,
    sd_dy: f64,
    k: Option<f64>,
}

pub fn parse_fovea_stats(text: &str, origin: &Path) -> Result<FoveaStats> {
    let raw: BTreeMap<String, RawGroupStats> =
        toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", origin.display())))?;
    let mut stats = FoveaStats::new();
    for (key, g) in raw {
        let group: ResolutionGroup = key.parse()?;
        let values = GroupStats {
            mean_dx: g.mean_dx,
            mean_dy: g.mean_dy,
            sd_dx: g.sd_dx,
            sd_dy: g.sd_dy,
            k: g.k.unwrap_or(DEFAULT_TOLERANCE_K),
        };
        stats
            .insert(group, values)
            .map_err(|e| Error::Config(format!("{}: [{key}]: {e}", origin.display())))?;
    }
    Ok(stats)
}

pub fn read_fovea_stats(path: impl AsRef<Path>) -> Result<FoveaStats> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fovea_stats(&text, path)
}

pub fn format_fovea_stats(stats: &FoveaStats) -> String {
    let mut out = String::new();
    for (group, g) in stats.groups() {
        let _ = writeln!(out, "[{group}]");
        let _ = writeln!(out, "mean_dx = {:?}", g.mean_dx);
        let _ = writeln!(out, "mean_dy = {:?}", g.mean_dy);
        let _ = writeln!(out, "sd_dx = {:?}", g.sd_dx);
        let _ = writeln!(out, "sd_dy = {:?}", g.sd_dy);
        let _ = writeln!(out, "k = {:?}\n", g.k);
    }
    out
}

/// Files in `dir` with one of `extensions`, keyed by file stem, sorted.
pub fn list_by_stem(dir: &Path, extensions: &[&str]) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if !path.is_file() || !ext.is_some_and(|e| extensions.contains(&e.as_str())) {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            if let Some(prev) = out.insert(stem.to_string(), path.clone()) {
                return Err(Error::format(
                    dir,
                    format!("ambiguous id `{stem}`: {} and {}", prev.display(), path.display()),
                ));
            }
        }
    }
    Ok(out)
}
