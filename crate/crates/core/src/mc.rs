//! Seeded, parallel Monte Carlo with a reduction order that does not depend
//! on the number of worker threads.
//!
//! Trials are grouped into fixed-size blocks. Each block folds its trials in
//! index order into a fresh accumulator, blocks run in parallel, and block
//! results are merged strictly in block order. The floating-point operation
//! sequence is therefore the same for any pool size.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Trials folded sequentially by one task.
pub const BLOCK_TRIALS: u64 = 64;

/// Blocks evaluated in parallel before their results are merged. Bounds the
/// number of live accumulators.
pub const BLOCKS_PER_WAVE: u64 = 64;

/// Independent random streams carved from one scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Channel = 1,
    Geometry = 2,
    StepSearch = 3,
    Empirical = 4,
}

/// Generator for one trial of one purpose. Distinct `(seed, stream, trial)`
/// triples give independent streams.
pub fn trial_rng(seed: u64, stream: Stream, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial);
    rng
}

/// Accumulator merged across blocks.
pub trait Merge {
    fn merge(&mut self, other: Self);
}

/// Runs `trial(index, &mut acc)` for every trial in `0..trials` and returns
/// the merged accumulator.
pub fn run_trials<A, I, F>(trials: u64, init: I, trial: F) -> A
where
    A: Merge + Send,
    I: Fn() -> A + Sync,
    F: Fn(u64, &mut A) + Sync,
{
    run_trials_with(trials, BLOCKS_PER_WAVE, init, trial)
}

/// As [`run_trials`], with at most `wave` block accumulators alive at once.
/// `wave` must not depend on the pool size, or determinism is lost.
pub fn run_trials_with<A, I, F>(trials: u64, wave: u64, init: I, trial: F) -> A
where
    A: Merge + Send,
    I: Fn() -> A + Sync,
    F: Fn(u64, &mut A) + Sync,
{
    let blocks = trials.div_ceil(BLOCK_TRIALS);
    let wave = wave.max(1);
    let mut total = init();
    let mut start = 0;
    while start < blocks {
        let end = (start + wave).min(blocks);
        let parts: Vec<A> = (start..end)
            .into_par_iter()
            .map(|b| {
                let mut acc = init();
                let lo = b * BLOCK_TRIALS;
                let hi = (lo + BLOCK_TRIALS).min(trials);
                for t in lo..hi {
                    trial(t, &mut acc);
                }
                acc
            })
            .collect();
        for p in parts {
            total.merge(p);
        }
        start = end;
    }
    total
}

struct Fallible<A> {
    acc: A,
    error: Option<Error>,
}

impl<A: Merge> Merge for Fallible<A> {
    fn merge(&mut self, o: Self) {
        if self.error.is_none() {
            self.error = o.error;
        }
        self.acc.merge(o.acc);
    }
}

/// As [`run_trials_with`] for trials that can fail. The error of the
/// lowest-numbered failing block is returned; later trials of a failed block
/// are skipped.
pub fn try_run_trials<A, I, F>(trials: u64, wave: u64, init: I, trial: F) -> Result<A>
where
    A: Merge + Send,
    I: Fn() -> A + Sync,
    F: Fn(u64, &mut A) -> Result<()> + Sync,
{
    let out = run_trials_with(
        trials,
        wave,
        || Fallible {
            acc: init(),
            error: None,
        },
        |t, f| {
            if f.error.is_none() {
                if let Err(e) = trial(t, &mut f.acc) {
                    f.error = Some(e);
                }
            }
        },
    );
    match out.error {
        Some(e) => Err(e),
        None => Ok(out.acc),
    }
}

/// Streaming mean and variance (Welford updates, Chan merges).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAcc {
    pub n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAcc {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64).max(0.0)
    }

    /// `1.96 ×` standard error of the mean.
    pub fn half_width(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        1.96 * (self.variance() / self.n as f64).sqrt()
    }
}

impl Merge for MeanAcc {
    fn merge(&mut self, o: Self) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = o;
            return;
        }
        let n = (self.n + o.n) as f64;
        let delta = o.mean - self.mean;
        self.mean += delta * o.n as f64 / n;
        self.m2 += o.m2 + delta * delta * self.n as f64 * o.n as f64 / n;
        self.n += o.n;
    }
}

/// Success counter for a proportion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CountAcc {
    pub hits: u64,
    pub n: u64,
}

impl CountAcc {
    pub fn push(&mut self, hit: bool) {
        self.n += 1;
        self.hits += u64::from(hit);
    }

    pub fn proportion(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.hits as f64 / self.n as f64
    }

    /// Wilson score interval at 95 %.
    pub fn wilson(&self) -> Wilson {
        wilson(self.hits, self.n, 1.96)
    }
}

impl Merge for CountAcc {
    fn merge(&mut self, o: Self) {
        self.hits += o.hits;
        self.n += o.n;
    }
}

impl<T: Merge> Merge for Vec<T> {
    fn merge(&mut self, other: Self) {
        assert_eq!(self.len(), other.len(), "accumulator shapes differ");
        for (a, b) in self.iter_mut().zip(other) {
            a.merge(b);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wilson {
    pub centre: f64,
    pub half_width: f64,
}

pub fn wilson(hits: u64, n: u64, z: f64) -> Wilson {
    if n == 0 {
        return Wilson {
            centre: 0.5,
            half_width: 0.5,
        };
    }
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half_width = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Wilson { centre, half_width }
}
