//! Annotated rendering: structure outlines and a fovea cross on the photo.

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Point, Raster};

pub const DISC_COLOR: [u8; 3] = [0, 255, 0];
pub const ATROPHY_COLOR: [u8; 3] = [255, 255, 255];
pub const DETACHMENT_COLOR: [u8; 3] = [255, 255, 0];
pub const FOVEA_COLOR: [u8; 3] = [160, 32, 240];

#[derive(Debug, Clone, Default)]
pub struct OverlayLayers<'a> {
    pub disc: Option<&'a BinaryMask>,
    pub atrophy: Option<&'a BinaryMask>,
    pub detachment: Option<&'a BinaryMask>,
    pub fovea: Option<Point>,
}

/// Foreground pixels with a 4-neighbour outside the mask or on the image edge.
pub fn outline(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    BinaryMask::from_fn(w, h, |x, y| {
        mask.get(x, y)
            && (x == 0
                || y == 0
                || x + 1 == w
                || y + 1 == h
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1))
    })
    .expect("same size as input")
}

fn paint(img: &mut Raster, mask: &BinaryMask, color: [u8; 3], thickness: usize) {
    let (w, h) = (img.width(), img.height());
    let r = thickness.saturating_sub(1) / 2;
    for (x, y) in outline(mask).foreground() {
        for py in y.saturating_sub(r)..=(y + r).min(h - 1) {
            for px in x.saturating_sub(r)..=(x + r).min(w - 1) {
                for (c, &v) in color.iter().enumerate() {
                    img.set(px, py, c, v);
                }
            }
        }
    }
}

/// Draws layers in the order detachment, atrophy, disc, fovea. Line
/// thickness scales with the image (1 px per 500 px of the longer side).
pub fn render_overlay(image: &Raster, layers: &OverlayLayers<'_>) -> Result<Raster> {
    let (w, h) = (image.width(), image.height());
    let mut img = if image.channels() == 3 {
        image.clone()
    } else {
        let g = image.channel(0);
        Raster::from_planes(&[g.clone(), g.clone(), g])?
    };
    let thickness = (w.max(h) / 500).max(1);
    for (mask, color) in [
        (layers.detachment, DETACHMENT_COLOR),
        (layers.atrophy, ATROPHY_COLOR),
        (layers.disc, DISC_COLOR),
    ] {
        if let Some(m) = mask {
            if (m.width(), m.height()) != (w, h) {
                return Err(Error::param(format!(
                    "mask {}x{} does not match image {w}x{h}",
                    m.width(),
                    m.height()
                )));
            }
            paint(&mut img, m, color, thickness);
        }
    }
    if let Some(p) = layers.fovea {
        if !p.is_finite() {
            return Err(Error::param("fovea coordinates must be finite"));
        }
        let arm = (w.max(h) as f64 / 60.0).max(3.0).round() as i64;
        let half = (thickness / 2) as i64;
        let (cx, cy) = (p.x.round() as i64, p.y.round() as i64);
        let mut put = |x: i64, y: i64| {
            if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                for (c, &v) in FOVEA_COLOR.iter().enumerate() {
                    img.set(x as usize, y as usize, c, v);
                }
            }
        };
        for d in -arm..=arm {
            for t in -half..=half {
                put(cx + d, cy + t);
                put(cx + t, cy + d);
            }
        }
    }
    Ok(img)
}
