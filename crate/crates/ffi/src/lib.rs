//! C ABI over `fundus_tk`.
//!
//! Every function returns an [`FtkStatus`]; results go through out
//! pointers. On failure the message for the calling thread is available
//! from [`ftk_last_error`]. Maps, masks and statistics are opaque handles
//! that must be released with their `_free` function.
//!
//! Boolean inputs are `uint8_t` arrays where any nonzero byte is true.

//! # Safety
//!
//! Pointers must be null or valid for the stated length; handles must come
//! from this library and not be used after they are freed.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use fundus_tk::io::Polarity;
use fundus_tk::postprocess::{FoveaSource, FoveaStats};
use fundus_tk::preprocess::IlluminationParams;
use fundus_tk::sampler::ScheduleConfig;
use fundus_tk::{BinaryMask, Error, ImageMeta, Point, ProbMap, Raster};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Integrity = 3,
    Config = 4,
    UndefinedMetric = 5,
    Io = 6,
    Format = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtkPolarity {
    /// Black (0) pixels are foreground.
    ZeroForeground = 0,
    NonzeroForeground = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtkFoveaSource {
    Prediction = 0,
    DiscFallback = 1,
    CenterFallback = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtkPoint {
    pub x: f64,
    pub y: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtkScheduleConfig {
    pub f_orig: f64,
    pub decay: f64,
    pub period: u32,
    pub seed: u64,
    pub batch: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FtkDraw {
    /// 1 for the minority class, 0 for the majority class.
    pub minority: u8,
    pub index: usize,
}

/// Probability map handle.
pub struct FtkProbMap(ProbMap);

/// Binary mask handle.
pub struct FtkMask(BinaryMask);

/// Per-resolution fovea offset statistics.
pub struct FtkFoveaStats(FoveaStats);

type Failure = (FtkStatus, String);
type Outcome = Result<(), Failure>;

impl From<Error> for FtkStatus {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(_) => FtkStatus::InvalidParameter,
            Error::Integrity(_) | Error::Batch { .. } => FtkStatus::Integrity,
            Error::Config(_) => FtkStatus::Config,
            Error::UndefinedMetric(_) => FtkStatus::UndefinedMetric,
            Error::Io { .. } => FtkStatus::Io,
            Error::Format { .. } | Error::Image { .. } => FtkStatus::Format,
        }
    }
}

fn fail(e: Error) -> Failure {
    let msg = e.to_string();
    (e.into(), msg)
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Outcome) -> FtkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            FtkStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            FtkStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    (FtkStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn obj<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(null(name))
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn bools(p: *const u8, len: usize, name: &str) -> Result<Vec<bool>, Failure> {
    Ok(slice(p, len, name)?.iter().map(|&b| b != 0).collect())
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (FtkStatus::InvalidParameter, format!("`{name}` is not UTF-8")))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

fn polarity(p: FtkPolarity) -> Polarity {
    match p {
        FtkPolarity::ZeroForeground => Polarity::ZeroForeground,
        FtkPolarity::NonzeroForeground => Polarity::NonzeroForeground,
    }
}

fn point(p: Point) -> FtkPoint {
    FtkPoint { x: p.x, y: p.y }
}

/// Message of the last failed call on this thread, or an empty string.
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ftk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

// Probability maps

/// Copies `width * height` row-major values in `[0, 1]` into a new map.
#[no_mangle]
pub unsafe extern "C" fn ftk_probmap_new(
    width: usize,
    height: usize,
    values: *const f64,
    map: *mut *mut FtkProbMap,
) -> FtkStatus {
    guard(|| {
        let out = out(map, "map")?;
        let n = width.checked_mul(height).ok_or_else(|| fail(Error::Parameter("size overflow".into())))?;
        let v = slice(values, n, "values")?.to_vec();
        *out = boxed(FtkProbMap(ProbMap::new(width, height, v).map_err(fail)?));
        Ok(())
    })
}

/// Reads a single-channel PMAP file.
#[no_mangle]
pub unsafe extern "C" fn ftk_probmap_read(path: *const c_char, map: *mut *mut FtkProbMap) -> FtkStatus {
    guard(|| {
        let out = out(map, "map")?;
        let m = fundus_tk::io::read_pmap(Path::new(text(path, "path")?)).map_err(fail)?;
        *out = boxed(FtkProbMap(m));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftk_probmap_write(map: *const FtkProbMap, path: *const c_char) -> FtkStatus {
    guard(|| fundus_tk::io::write_pmap(Path::new(text(path, "path")?), &obj(map, "map")?.0).map_err(fail))
}

#[no_mangle]
pub unsafe extern "C" fn ftk_probmap_size(
    map: *const FtkProbMap,
    width: *mut usize,
    height: *mut usize,
) -> FtkStatus {
    guard(|| {
        let m = &obj(map, "map")?.0;
        *out(width, "width")? = m.width();
        *out(height, "height")? = m.height();
        Ok(())
    })
}

/// Copies the values into `buf`, which must hold `width * height` doubles.
#[no_mangle]
pub unsafe extern "C" fn ftk_probmap_copy_values(map: *const FtkProbMap, buf: *mut f64, len: usize) -> FtkStatus {
    guard(|| {
        let v = obj(map, "map")?.0.values();
        if len < v.len() {
            return Err((FtkStatus::BufferTooSmall, format!("need {} values, got {len}", v.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftk_probmap_free(map: *mut FtkProbMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Pixel-wise mean of `count` equally sized maps.
#[no_mangle]
pub unsafe extern "C" fn ftk_ensemble_average(
    maps: *const *const FtkProbMap,
    count: usize,
    result: *mut *mut FtkProbMap,
) -> FtkStatus {
    guard(|| {
        let out = out(result, "result")?;
        let handles = slice(maps, count, "maps")?;
        let owned = handles
            .iter()
            .map(|&h| obj(h, "maps[i]").map(|m| m.0.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        *out = boxed(FtkProbMap(fundus_tk::tiler::ensemble_average(&owned).map_err(fail)?));
        Ok(())
    })
}

// Masks

/// Copies `width * height` row-major bytes (nonzero = foreground).
#[no_mangle]
pub unsafe extern "C" fn ftk_mask_new(
    width: usize,
    height: usize,
    bits: *const u8,
    mask: *mut *mut FtkMask,
) -> FtkStatus {
    guard(|| {
        let out = out(mask, "mask")?;
        let n = width.checked_mul(height).ok_or_else(|| fail(Error::Parameter("size overflow".into())))?;
        let b = bools(bits, n, "bits")?;
        *out = boxed(FtkMask(BinaryMask::new(width, height, b).map_err(fail)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftk_mask_read(
    path: *const c_char,
    polarity_: FtkPolarity,
    mask: *mut *mut FtkMask,
) -> FtkStatus {
    guard(|| {
        let out = out(mask, "mask")?;
        let m = fundus_tk::io::read_mask(Path::new(text(path, "path")?), polarity(polarity_)).map_err(fail)?;
        *out = boxed(FtkMask(m));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftk_mask_write(mask: *const FtkMask, path: *const c_char, polarity_: FtkPolarity) -> FtkStatus {
    guard(|| {
        fundus_tk::io::write_mask(Path::new(text(path, "path")?), &obj(mask, "mask")?.0, polarity(polarity_))
            .map_err(fail)
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftk_mask_size(mask: *const FtkMask, width: *mut usize, height: *mut usize) -> FtkStatus {
    guard(|| {
        let m = &obj(mask, "mask")?.0;
        *out(width, "width")? = m.width();
        *out(height, "height")? = m.height();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftk_mask_count(mask: *const FtkMask, count: *mut usize) -> FtkStatus {
    guard(|| {
        *out(count, "count")? = obj(mask, "mask")?.0.count();
        Ok(())
    })
}

/// Writes 1/0 per pixel into `buf`, which must hold `width * height` bytes.
#[no_mangle]
pub unsafe extern "C" fn ftk_mask_copy_bits(mask: *const FtkMask, buf: *mut u8, len: usize) -> FtkStatus {
    guard(|| {
        let bits = obj(mask, "mask")?.0.bits();
        if len < bits.len() {
            return Err((FtkStatus::BufferTooSmall, format!("need {} bytes, got {len}", bits.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let dst = std::slice::from_raw_parts_mut(buf, bits.len());
        for (d, &b) in dst.iter_mut().zip(bits) {
            *d = b as u8;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftk_mask_free(mask: *mut FtkMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ftk_threshold(map: *const FtkProbMap, t: f64, mask: *mut *mut FtkMask) -> FtkStatus {
    guard(|| {
        let out = out(mask, "mask")?;
        *out = boxed(FtkMask(fundus_tk::threshold(&obj(map, "map")?.0, t).map_err(fail)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftk_area_fraction(mask: *const FtkMask, fraction: *mut f64) -> FtkStatus {
    guard(|| {
        *out(fraction, "fraction")? = fundus_tk::area_fraction(&obj(mask, "mask")?.0);
        Ok(())
    })
}

/// `found` is set to 0 for an empty mask, in which case `centroid` is untouched.
#[no_mangle]
pub unsafe extern "C" fn ftk_centroid(mask: *const FtkMask, centroid: *mut FtkPoint, found: *mut u8) -> FtkStatus {
    guard(|| {
        let m = &obj(mask, "mask")?.0;
        let found = out(found, "found")?;
        let c = out(centroid, "centroid")?;
        match fundus_tk::centroid(m) {
            Some(p) => {
                *c = point(p);
                *found = 1;
            }
            None => *found = 0,
        }
        Ok(())
    })
}

// Preprocessing

/// Illumination correction of an interleaved 8-bit image into `dst`
/// (same size as `src`). `sigma <= 0` selects `width / 30`.
#[no_mangle]
pub unsafe extern "C" fn ftk_illumination_correct(
    src: *const u8,
    width: usize,
    height: usize,
    channels: usize,
    sigma: f64,
    gain: f64,
    offset: u8,
    dst: *mut u8,
) -> FtkStatus {
    guard(|| {
        let n = width
            .checked_mul(height)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| fail(Error::Parameter("size overflow".into())))?;
        let img = Raster::new(width, height, channels, slice(src, n, "src")?.to_vec()).map_err(fail)?;
        let sigma = if sigma > 0.0 { sigma } else { IlluminationParams::for_width(width).sigma };
        let res = fundus_tk::preprocess::illumination_correct(&img, &IlluminationParams { sigma, gain, offset })
            .map_err(fail)?;
        if dst.is_null() {
            return Err(null("dst"));
        }
        std::ptr::copy_nonoverlapping(res.data().as_ptr(), dst, n);
        Ok(())
    })
}

// Post-processing

#[no_mangle]
pub unsafe extern "C" fn ftk_fuse_disc_atrophy(
    disc_p: *const FtkProbMap,
    atrophy_p: *const FtkProbMap,
    t: f64,
    disc: *mut *mut FtkMask,
    atrophy: *mut *mut FtkMask,
) -> FtkStatus {
    guard(|| {
        let (d_out, a_out) = (out(disc, "disc")?, out(atrophy, "atrophy")?);
        let f = fundus_tk::postprocess::fuse_disc_atrophy(&obj(disc_p, "disc_p")?.0, &obj(atrophy_p, "atrophy_p")?.0, t)
            .map_err(fail)?;
        *d_out = boxed(FtkMask(f.disc));
        *a_out = boxed(FtkMask(f.atrophy));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftk_detachment_fix(mask: *const FtkMask, fraction: f64, fixed: *mut *mut FtkMask) -> FtkStatus {
    guard(|| {
        let out = out(fixed, "fixed")?;
        *out = boxed(FtkMask(
            fundus_tk::postprocess::detachment_fix(&obj(mask, "mask")?.0, fraction).map_err(fail)?,
        ));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftk_rasterize_fovea(
    center: FtkPoint,
    radius: f64,
    width: usize,
    height: usize,
    mask: *mut *mut FtkMask,
) -> FtkStatus {
    guard(|| {
        let out = out(mask, "mask")?;
        let m = fundus_tk::postprocess::rasterize_fovea(Point::new(center.x, center.y), radius, width, height)
            .map_err(fail)?;
        *out = boxed(FtkMask(m));
        Ok(())
    })
}

/// Centroid of the largest blob at threshold `t`; `found` is 0 when there is none.
#[no_mangle]
pub unsafe extern "C" fn ftk_extract_fovea(
    map: *const FtkProbMap,
    t: f64,
    fovea: *mut FtkPoint,
    found: *mut u8,
) -> FtkStatus {
    guard(|| {
        let m = &obj(map, "map")?.0;
        let found = out(found, "found")?;
        let f = out(fovea, "fovea")?;
        match fundus_tk::postprocess::extract_fovea(m, t).map_err(fail)? {
            Some(p) => {
                *f = point(p);
                *found = 1;
            }
            None => *found = 0,
        }
        Ok(())
    })
}

/// Parses statistics from TOML text with `[WxH]` sections.
#[no_mangle]
pub unsafe extern "C" fn ftk_fovea_stats_parse(toml: *const c_char, stats: *mut *mut FtkFoveaStats) -> FtkStatus {
    guard(|| {
        let out = out(stats, "stats")?;
        let s = fundus_tk::io::parse_fovea_stats(text(toml, "toml")?, Path::new("<memory>")).map_err(fail)?;
        *out = boxed(FtkFoveaStats(s));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftk_fovea_stats_read(path: *const c_char, stats: *mut *mut FtkFoveaStats) -> FtkStatus {
    guard(|| {
        let out = out(stats, "stats")?;
        let s = fundus_tk::io::read_fovea_stats(Path::new(text(path, "path")?)).map_err(fail)?;
        *out = boxed(FtkFoveaStats(s));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftk_fovea_stats_free(stats: *mut FtkFoveaStats) {
    if !stats.is_null() {
        drop(Box::from_raw(stats));
    }
}

/// Fovea from a segmentation map with disc-based sanity check and
/// fallbacks. `source` may be null.
#[no_mangle]
pub unsafe extern "C" fn ftk_localize_fovea(
    map: *const FtkProbMap,
    disc: *const FtkMask,
    stats: *const FtkFoveaStats,
    t: f64,
    fovea: *mut FtkPoint,
    source: *mut FtkFoveaSource,
) -> FtkStatus {
    guard(|| {
        let m = &obj(map, "map")?.0;
        let meta = ImageMeta::new("ffi", m.width(), m.height());
        let est = fundus_tk::postprocess::localize_fovea_detailed(
            m,
            &obj(disc, "disc")?.0,
            &obj(stats, "stats")?.0,
            &meta,
            t,
        )
        .map_err(fail)?;
        *out(fovea, "fovea")? = point(est.point);
        if let Some(s) = source.as_mut() {
            *s = match est.source {
                FoveaSource::Prediction => FtkFoveaSource::Prediction,
                FoveaSource::DiscFallback => FtkFoveaSource::DiscFallback,
                FoveaSource::CenterFallback => FtkFoveaSource::CenterFallback,
            };
        }
        Ok(())
    })
}

// Metrics

#[no_mangle]
pub unsafe extern "C" fn ftk_auc(scores: *const f64, labels: *const u8, len: usize, auc: *mut f64) -> FtkStatus {
    guard(|| {
        let s = slice(scores, len, "scores")?;
        let l = bools(labels, len, "labels")?;
        *out(auc, "auc")? = fundus_tk::metrics::auc(s, &l).map_err(fail)?;
        Ok(())
    })
}

/// `defined` is 0 when the ground truth is empty; `dice` is untouched then.
#[no_mangle]
pub unsafe extern "C" fn ftk_dice(pred: *const FtkMask, gt: *const FtkMask, dice: *mut f64, defined: *mut u8) -> FtkStatus {
    guard(|| {
        let defined = out(defined, "defined")?;
        let d = out(dice, "dice")?;
        match fundus_tk::metrics::dice(&obj(pred, "pred")?.0, &obj(gt, "gt")?.0).map_err(fail)? {
            Some(v) => {
                *d = v;
                *defined = 1;
            }
            None => *defined = 0,
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftk_detection_f1(
    pred_present: *const u8,
    gt_present: *const u8,
    len: usize,
    f1: *mut f64,
) -> FtkStatus {
    guard(|| {
        let p = bools(pred_present, len, "pred_present")?;
        let g = bools(gt_present, len, "gt_present")?;
        *out(f1, "f1")? = fundus_tk::metrics::detection_f1(&p, &g).map_err(fail)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn ftk_euclidean(p: FtkPoint, q: FtkPoint) -> f64 {
    fundus_tk::metrics::euclidean(Point::new(p.x, p.y), Point::new(q.x, q.y))
}

// Losses

#[no_mangle]
pub unsafe extern "C" fn ftk_bce(p: *const f64, y: *const u8, len: usize, loss: *mut f64) -> FtkStatus {
    guard(|| {
        let y = bools(y, len, "y")?;
        *out(loss, "loss")? = fundus_tk::losses::bce(slice(p, len, "p")?, &y).map_err(fail)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftk_dice_loss(p: *const f64, y: *const u8, len: usize, smooth: f64, loss: *mut f64) -> FtkStatus {
    guard(|| {
        let y = bools(y, len, "y")?;
        *out(loss, "loss")? = fundus_tk::losses::dice_loss(slice(p, len, "p")?, &y, smooth).map_err(fail)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftk_lovasz_binary(scores: *const f64, y: *const u8, len: usize, loss: *mut f64) -> FtkStatus {
    guard(|| {
        let y = bools(y, len, "y")?;
        *out(loss, "loss")? = fundus_tk::losses::lovasz_binary(slice(scores, len, "scores")?, &y).map_err(fail)?;
        Ok(())
    })
}

// Sampler

fn schedule(c: &FtkScheduleConfig) -> ScheduleConfig {
    ScheduleConfig { f_orig: c.f_orig, decay: c.decay, period: c.period, seed: c.seed, batch: c.batch }
}

#[no_mangle]
pub unsafe extern "C" fn ftk_minority_fraction(epoch: u64, config: *const FtkScheduleConfig, fraction: *mut f64) -> FtkStatus {
    guard(|| {
        let cfg = schedule(obj(config, "config")?);
        cfg.validate().map_err(fail)?;
        *out(fraction, "fraction")? = fundus_tk::sampler::minority_fraction(epoch, &cfg);
        Ok(())
    })
}

/// Draws for one epoch. `len` always receives the required length; when
/// `draws` is null or `capacity` is smaller, nothing else is written and
/// `FTK_STATUS_BUFFER_TOO_SMALL` is returned (unless `draws` is null).
#[no_mangle]
pub unsafe extern "C" fn ftk_epoch_draws(
    n_minority: usize,
    n_majority: usize,
    epoch: u64,
    config: *const FtkScheduleConfig,
    draws: *mut FtkDraw,
    capacity: usize,
    len: *mut usize,
) -> FtkStatus {
    guard(|| {
        let cfg = schedule(obj(config, "config")?);
        let len = out(len, "len")?;
        let d = fundus_tk::sampler::epoch_draws(n_minority, n_majority, epoch, &cfg).map_err(fail)?;
        *len = d.len();
        if draws.is_null() {
            return Ok(());
        }
        if capacity < d.len() {
            return Err((FtkStatus::BufferTooSmall, format!("need {} draws, got {capacity}", d.len())));
        }
        let dst = std::slice::from_raw_parts_mut(draws, d.len());
        for (o, v) in dst.iter_mut().zip(&d) {
            *o = FtkDraw { minority: v.minority as u8, index: v.index };
        }
        Ok(())
    })
}
