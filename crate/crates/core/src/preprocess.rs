//! Illumination correction and resampling.
//!
//! Fundus photographs are unevenly lit. The correction subtracts a heavily
//! blurred copy of the image (the background estimate) and re-centres the
//! residual around a fixed gray level:
//!
//! ```text
//! out = clamp(gain * (I - G_sigma(I)) + offset, 0, 255)
//! ```
//!
//! applied to each channel independently. The blur is a separable Gaussian
//! truncated at `ceil(3 sigma)` and renormalized, with edge replication.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, ProbMap, Raster};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlluminationParams {
    /// Gaussian standard deviation in pixels.
    pub sigma: f64,
    pub gain: f64,
    pub offset: u8,
}

impl IlluminationParams {
    pub const DEFAULT_GAIN: f64 = 4.0;
    pub const DEFAULT_OFFSET: u8 = 128;

    /// `sigma = width / 30`, `gain = 4`, `offset = 128`.
    pub fn for_width(width: usize) -> Self {
        Self {
            sigma: width as f64 / 30.0,
            gain: Self::DEFAULT_GAIN,
            offset: Self::DEFAULT_OFFSET,
        }
    }
}

/// Normalized 1-D Gaussian taps over `[-r, r]`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / denom).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(taps)
}

fn convolve_rows(src: &[f64], w: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let last = w as isize - 1;
    let mut out = vec![0.0; src.len()];
    out.par_chunks_mut(w)
        .zip(src.par_chunks(w))
        .for_each(|(dst, row)| {
            for (x, d) in dst.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, &wt) in kernel.iter().enumerate() {
                    let sx = (x as isize + k as isize - r).clamp(0, last) as usize;
                    acc += wt * row[sx];
                }
                *d = acc;
            }
        });
    out
}

fn convolve_cols(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let last = h as isize - 1;
    let mut out = vec![0.0; src.len()];
    out.par_chunks_mut(w).enumerate().for_each(|(y, dst)| {
        for (x, d) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &wt) in kernel.iter().enumerate() {
                let sy = (y as isize + k as isize - r).clamp(0, last) as usize;
                acc += wt * src[sy * w + x];
            }
            *d = acc;
        }
    });
    out
}

/// Separable Gaussian blur of a single plane with edge replication.
pub fn gaussian_blur(plane: &[f64], width: usize, height: usize, sigma: f64) -> Result<Vec<f64>> {
    if plane.len() != width * height {
        return Err(Error::param("plane length does not match its size"));
    }
    let kernel = gaussian_kernel(sigma)?;
    let horiz = convolve_rows(plane, width, &kernel);
    Ok(convolve_cols(&horiz, width, height, &kernel))
}

pub fn illumination_correct(image: &Raster, params: &IlluminationParams) -> Result<Raster> {
    if !params.gain.is_finite() {
        return Err(Error::param(format!("gain must be finite, got {}", params.gain)));
    }
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    let offset = params.offset as f64;
    let mut out = vec![0u8; w * h * ch];
    for c in 0..ch {
        let plane: Vec<f64> = image.data().iter().skip(c).step_by(ch).map(|&v| v as f64).collect();
        let background = gaussian_blur(&plane, w, h, params.sigma)?;
        for (i, (&v, &bg)) in plane.iter().zip(&background).enumerate() {
            let corrected = params.gain * (v - bg) + offset;
            out[i * ch + c] = corrected.round().clamp(0.0, 255.0) as u8;
        }
    }
    Raster::new(w, h, ch, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResizeMode {
    Nearest,
    Bilinear,
}

fn check_target(tw: usize, th: usize) -> Result<()> {
    if tw == 0 || th == 0 {
        return Err(Error::param(format!("resize target {tw}x{th} is empty")));
    }
    Ok(())
}

/// Source index for nearest sampling with pixel-center alignment,
/// `floor((d + 0.5) * src / dst)` in exact integer arithmetic.
#[inline]
fn nearest_index(d: usize, src: usize, dst: usize) -> usize {
    (((2 * d + 1) * src) / (2 * dst)).min(src - 1)
}

/// Lower source index and interpolation weight for bilinear sampling.
#[inline]
fn bilinear_coord(d: usize, src: usize, dst: usize) -> (usize, usize, f64) {
    let pos = ((d as f64 + 0.5) * (src as f64 / dst as f64) - 0.5).clamp(0.0, (src - 1) as f64);
    let i0 = pos.floor() as usize;
    let i1 = (i0 + 1).min(src - 1);
    (i0, i1, pos - i0 as f64)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Resamples a single `f64` plane. Constant planes are preserved exactly.
pub fn resample_plane(
    src: &[f64],
    w: usize,
    h: usize,
    tw: usize,
    th: usize,
    mode: ResizeMode,
) -> Result<Vec<f64>> {
    check_target(tw, th)?;
    if src.len() != w * h || w == 0 || h == 0 {
        return Err(Error::param("plane length does not match its size"));
    }
    let mut out = Vec::with_capacity(tw * th);
    match mode {
        ResizeMode::Nearest => {
            let xs: Vec<usize> = (0..tw).map(|x| nearest_index(x, w, tw)).collect();
            for y in 0..th {
                let row = nearest_index(y, h, th) * w;
                out.extend(xs.iter().map(|&sx| src[row + sx]));
            }
        }
        ResizeMode::Bilinear => {
            let xs: Vec<_> = (0..tw).map(|x| bilinear_coord(x, w, tw)).collect();
            for y in 0..th {
                let (y0, y1, fy) = bilinear_coord(y, h, th);
                for &(x0, x1, fx) in &xs {
                    let top = lerp(src[y0 * w + x0], src[y0 * w + x1], fx);
                    let bottom = lerp(src[y1 * w + x0], src[y1 * w + x1], fx);
                    out.push(lerp(top, bottom, fy));
                }
            }
        }
    }
    Ok(out)
}

pub fn resize(image: &Raster, tw: usize, th: usize, mode: ResizeMode) -> Result<Raster> {
    check_target(tw, th)?;
    let (w, h, ch) = (image.width(), image.height(), image.channels());
    if (w, h) == (tw, th) {
        return Ok(image.clone());
    }
    let mut out = vec![0u8; tw * th * ch];
    for c in 0..ch {
        let plane: Vec<f64> = image.data().iter().skip(c).step_by(ch).map(|&v| v as f64).collect();
        let resized = resample_plane(&plane, w, h, tw, th, mode)?;
        for (i, v) in resized.into_iter().enumerate() {
            out[i * ch + c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    Raster::new(tw, th, ch, out)
}

pub fn resize_map(map: &ProbMap, tw: usize, th: usize, mode: ResizeMode) -> Result<ProbMap> {
    if (map.width(), map.height()) == (tw, th) {
        check_target(tw, th)?;
        return Ok(map.clone());
    }
    let mut values = resample_plane(map.values(), map.width(), map.height(), tw, th, mode)?;
    values.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(ProbMap::from_raw(tw, th, values))
}

/// Nearest-neighbour mask resampling.
pub fn resize_mask(mask: &BinaryMask, tw: usize, th: usize) -> Result<BinaryMask> {
    check_target(tw, th)?;
    let (w, h) = (mask.width(), mask.height());
    BinaryMask::from_fn(tw, th, |x, y| {
        mask.get(nearest_index(x, w, tw), nearest_index(y, h, th))
    })
}
