//! Decaying class-balanced sampling schedule.
//!
//! Training starts with balanced mini-batches and relaxes towards the data's
//! own minority prevalence. The excess of the minority share over its
//! prevalence shrinks geometrically every `period` epochs:
//!
//! ```text
//! f(e) = f_orig + (0.5 - f_orig) * decay^floor(e / period)
//! ```
//!
//! # Random stream
//!
//! Draws for epoch `e` come from Xoshiro256++ seeded through SplitMix64
//! (`seed_from_u64`) with `seed ^ (e * 0x9E3779B97F4A7C15)` (wrapping).
//! Each draw consumes two outputs:
//!
//! 1. `u = (next_u64 >> 11) * 2^-53`; the draw is minority iff `u < f(e)`.
//! 2. the within-class index `(next_u64 * len) >> 64` (128-bit product),
//!    i.e. sampling with replacement.
//!
//! The stream is fully specified by this description, so other
//! implementations can reproduce index sequences bit for bit.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

pub const DEFAULT_DECAY: f64 = 0.75;
pub const DEFAULT_PERIOD: u32 = 5;

const EPOCH_STREAM_MULTIPLIER: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    /// Minority prevalence in the data, in `(0, 0.5)`.
    pub f_orig: f64,
    pub decay: f64,
    /// Epochs between decay steps.
    pub period: u32,
    pub seed: u64,
    pub batch: usize,
}

impl ScheduleConfig {
    pub fn new(f_orig: f64, seed: u64, batch: usize) -> Self {
        Self { f_orig, decay: DEFAULT_DECAY, period: DEFAULT_PERIOD, seed, batch }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_orig > 0.0 && self.f_orig < 0.5) {
            return Err(Error::param(format!("f_orig {} outside (0, 0.5)", self.f_orig)));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::param(format!("decay {} outside (0, 1)", self.decay)));
        }
        if self.period == 0 {
            return Err(Error::param("period must be at least 1"));
        }
        if self.batch == 0 {
            return Err(Error::param("batch must be at least 1"));
        }
        Ok(())
    }
}

/// Minority share of draws at `epoch`. Exactly 0.5 during the first period.
pub fn minority_fraction(epoch: u64, cfg: &ScheduleConfig) -> f64 {
    let steps = epoch / cfg.period.max(1) as u64;
    if steps == 0 {
        return 0.5;
    }
    let factor = cfg.decay.powi(steps.min(i32::MAX as u64) as i32);
    cfg.f_orig + (0.5 - cfg.f_orig) * factor
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Draw {
    pub minority: bool,
    /// Index into the minority or majority list.
    pub index: usize,
}

fn epoch_rng(seed: u64, epoch: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed ^ epoch.wrapping_mul(EPOCH_STREAM_MULTIPLIER))
}

#[inline]
fn unit_f64(rng: &mut Xoshiro256PlusPlus) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn bounded(rng: &mut Xoshiro256PlusPlus, len: usize) -> usize {
    ((rng.next_u64() as u128 * len as u128) >> 64) as usize
}

/// Class/index draws for one epoch, padded to a whole number of batches.
pub fn epoch_draws(
    n_minority: usize,
    n_majority: usize,
    epoch: u64,
    cfg: &ScheduleConfig,
) -> Result<Vec<Draw>> {
    cfg.validate()?;
    if n_minority == 0 || n_majority == 0 {
        return Err(Error::param("both minority and majority lists must be non-empty"));
    }
    let total = n_minority + n_majority;
    let len = total.div_ceil(cfg.batch) * cfg.batch;
    let f = minority_fraction(epoch, cfg);
    let mut rng = epoch_rng(cfg.seed, epoch);
    Ok((0..len)
        .map(|_| {
            let minority = unit_f64(&mut rng) < f;
            let index = bounded(&mut rng, if minority { n_minority } else { n_majority });
            Draw { minority, index }
        })
        .collect())
}

/// Ordered sample ids for one epoch.
pub fn epoch_indices<T: Clone>(
    minority_ids: &[T],
    majority_ids: &[T],
    epoch: u64,
    cfg: &ScheduleConfig,
) -> Result<Vec<T>> {
    let draws = epoch_draws(minority_ids.len(), majority_ids.len(), epoch, cfg)?;
    Ok(draws
        .into_iter()
        .map(|d| {
            if d.minority {
                minority_ids[d.index].clone()
            } else {
                majority_ids[d.index].clone()
            }
        })
        .collect())
}
