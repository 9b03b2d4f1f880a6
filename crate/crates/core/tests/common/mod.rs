#![allow(dead_code)]

use fundus_tk::{BinaryMask, ProbMap};
use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Small deterministic generator for randomized fixtures.
pub struct TestRng(Xoshiro256PlusPlus);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn mask(&mut self, w: usize, h: usize, p: f64) -> BinaryMask {
        BinaryMask::from_fn(w, h, |_, _| self.chance(p)).unwrap()
    }

    pub fn map(&mut self, w: usize, h: usize) -> ProbMap {
        ProbMap::from_fn(w, h, |_, _| self.unit()).unwrap()
    }

    pub fn shuffle<T>(&mut self, v: &mut [T]) {
        for i in (1..v.len()).rev() {
            v.swap(i, self.below(i + 1));
        }
    }
}

/// Brute-force Mann-Whitney AUC over all positive/negative pairs.
pub fn auc_pairs_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                credit += 1.0;
            } else if scores[i] == scores[j] {
                credit += 0.5;
            }
        }
    }
    credit / pairs
}

/// Pixel-counting Dice, `None` for empty ground truth.
pub fn dice_oracle(pred: &BinaryMask, gt: &BinaryMask) -> Option<f64> {
    let (mut i, mut p, mut g) = (0usize, 0usize, 0usize);
    for y in 0..gt.height() {
        for x in 0..gt.width() {
            let (a, b) = (pred.get(x, y), gt.get(x, y));
            i += (a && b) as usize;
            p += a as usize;
            g += b as usize;
        }
    }
    (g > 0).then(|| 2.0 * i as f64 / (p + g) as f64)
}

pub fn iou_oracle(pred: &[bool], gt: &[bool]) -> f64 {
    let inter = pred.iter().zip(gt).filter(|(&a, &b)| a && b).count();
    let union = pred.iter().zip(gt).filter(|(&a, &b)| a || b).count();
    inter as f64 / union as f64
}

/// Jaccard loss of the error set `e`: `1 - |y \ e| / |y ∪ e|`.
fn jaccard_loss_of_set(e: &[bool], y: &[bool]) -> f64 {
    let kept = y.iter().zip(e).filter(|(&y, &e)| y && !e).count();
    let union = y.iter().zip(e).filter(|(&y, &e)| y || e).count();
    if union == 0 {
        0.0
    } else {
        1.0 - kept as f64 / union as f64
    }
}

/// Lovász extension by its level-set integral
/// `∫_0^∞ ΔJ({i : m_i ≥ t}) dt`, evaluated piecewise between distinct
/// error levels.
pub fn lovasz_level_set_oracle(errors: &[f64], y: &[bool]) -> f64 {
    if !y.iter().any(|&v| v) {
        return 0.0;
    }
    let mut levels: Vec<f64> = errors.iter().copied().filter(|&m| m > 0.0).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    let mut total = 0.0;
    for (k, &v) in levels.iter().enumerate() {
        let next = levels.get(k + 1).copied().unwrap_or(0.0);
        let set: Vec<bool> = errors.iter().map(|&m| m >= v).collect();
        total += (v - next) * jaccard_loss_of_set(&set, y);
    }
    total
}

pub fn hinge_errors(scores: &[f64], y: &[bool]) -> Vec<f64> {
    scores
        .iter()
        .zip(y)
        .map(|(&s, &y)| (1.0 - s * if y { 1.0 } else { -1.0 }).max(0.0))
        .collect()
}

/// Direct 2-D truncated Gaussian with edge replication, one gray plane.
pub fn dense_gaussian_oracle(plane: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let mut weights = Vec::new();
    let mut total = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            let wgt = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            weights.push((dx, dy, wgt));
            total += wgt;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = 0.0;
            for &(dx, dy, wgt) in &weights {
                let sx = (x + dx).clamp(0, w as i64 - 1) as usize;
                let sy = (y + dy).clamp(0, h as i64 - 1) as usize;
                acc += wgt * plane[sy * w + sx];
            }
            out[y as usize * w + x as usize] = acc / total;
        }
    }
    out
}

/// Component sizes by explicit-stack flood fill, 8-connectivity, sorted descending.
pub fn flood_fill_sizes(mask: &BinaryMask) -> Vec<usize> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut seen = vec![false; (w * h) as usize];
    let mut sizes = Vec::new();
    for sy in 0..h {
        for sx in 0..w {
            let si = (sy * w + sx) as usize;
            if !mask.get(sx as usize, sy as usize) || seen[si] {
                continue;
            }
            let mut stack = vec![(sx, sy)];
            seen[si] = true;
            let mut n = 0;
            while let Some((x, y)) = stack.pop() {
                n += 1;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let ni = (ny * w + nx) as usize;
                        if mask.get(nx as usize, ny as usize) && !seen[ni] {
                            seen[ni] = true;
                            stack.push((nx, ny));
                        }
                    }
                }
            }
            sizes.push(n);
        }
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Writes `map` values as a probability map with values 0/1 for a mask.
pub fn mask_to_map(mask: &BinaryMask) -> ProbMap {
    let v = mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    ProbMap::new(mask.width(), mask.height(), v).unwrap()
}

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Writes a run directory with `n` images of `size`×`size` pixels:
/// classification scores, fovea coordinates and the three lesion masks.
/// Calling it twice with the same arguments gives identical trees.
pub fn write_run(dir: &std::path::Path, n: usize, size: usize, seed: u64) {
    use fundus_tk::io::{format_coords, format_scores, write_mask, write_text, Polarity};
    use fundus_tk::Point;

    let mut rng = TestRng::new(seed);
    let ids: Vec<String> = (0..n).map(|i| format!("img{i:03}")).collect();
    let labels: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    write_text(
        dir.join("classification.csv"),
        &format_scores(ids.iter().map(|s| s.as_str()).zip(labels.iter().copied())),
    )
    .unwrap();
    let coords: Vec<Point> = (0..n)
        .map(|_| Point::new(rng.range(0.0, size as f64), rng.range(0.0, size as f64)))
        .collect();
    write_text(dir.join("fovea.csv"), &format_coords(ids.iter().map(|s| s.as_str()).zip(coords))).unwrap();
    for class in ["disc", "atrophy", "detachment"] {
        std::fs::create_dir_all(dir.join(class)).unwrap();
    }
    for (i, id) in ids.iter().enumerate() {
        // Disc absent on every fourth image, detachment on two of three.
        let disc = if i % 4 == 3 {
            BinaryMask::empty(size, size).unwrap()
        } else {
            let (cx, cy, r) = (rng.range(8.0, size as f64 - 8.0), rng.range(8.0, size as f64 - 8.0), rng.range(3.0, 7.0));
            fundus_tk::postprocess::rasterize_fovea(Point::new(cx, cy), r, size, size).unwrap()
        };
        let atrophy = rng.mask(size, size, 0.2);
        let detachment = if i % 3 == 0 { rng.mask(size, size, 0.1) } else { BinaryMask::empty(size, size).unwrap() };
        for (class, m) in [("disc", &disc), ("atrophy", &atrophy), ("detachment", &detachment)] {
            write_mask(dir.join(class).join(format!("{id}.png")), m, Polarity::ZeroForeground).unwrap();
        }
    }
}
