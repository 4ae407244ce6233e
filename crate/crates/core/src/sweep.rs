//! Monte Carlo power sweeps with an exhaustive allocation search.
//!
//! Every trial produces one power-independent sample per scheme. The sample
//! is evaluated at every transmit SNR and every allocation of the search
//! grid, so all powers and all allocations share the same channel draws.
//! After the last trial the allocation with the best objective on the mean
//! rates is selected per power.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{try_run_trials, CountAcc, MeanAcc, Merge, Wilson};
use crate::partition::jain_index;

/// Default number of grid points per simplex axis (0.01 resolution).
pub const DEFAULT_GRID_POINTS: usize = 101;

/// Upper bound on the number of allocation vectors searched.
pub const MAX_GRID_SIZE: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Jain's fairness index of the ergodic rates.
    #[default]
    Jain,
    /// Smallest ergodic rate.
    MinRate,
}

impl Objective {
    pub fn score(&self, rates: &[f64]) -> f64 {
        match self {
            Objective::Jain => jain_index(rates).unwrap_or(0.0),
            Objective::MinRate => rates.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Candidate allocation vectors on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationGrid {
    points: Vec<Vec<f64>>,
    steps: usize,
}

impl AllocationGrid {
    /// All vectors of `dim` multiples of `1/steps` summing to one, in
    /// lexicographic order of their integer numerators. `points_per_axis` is
    /// reduced when the full grid would exceed `max_points` vectors.
    pub fn simplex(dim: usize, points_per_axis: usize, max_points: usize) -> Result<Self> {
        if points_per_axis < 2 {
            return Err(Error::config(format!(
                "allocation grid needs at least 2 points per axis, got {points_per_axis}"
            )));
        }
        if dim <= 1 {
            return Ok(Self::fixed(vec![1.0; dim]));
        }
        let mut steps = points_per_axis - 1;
        while steps > 1 && binomial(steps + dim - 1, dim - 1) > max_points {
            steps -= 1;
        }
        if steps + 1 < points_per_axis {
            log::warn!(
                "allocation grid for {dim} users reduced to {} points per axis",
                steps + 1
            );
        }
        let mut points = Vec::new();
        let mut current = vec![0usize; dim];
        compositions(steps, 0, &mut current, &mut |c| {
            points.push(c.iter().map(|&k| k as f64 / steps as f64).collect())
        });
        Ok(Self { points, steps })
    }

    /// A single, fixed allocation.
    pub fn fixed(point: Vec<f64>) -> Self {
        Self {
            points: vec![point],
            steps: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Grid resolution `1/steps`; zero for a fixed allocation.
    pub fn resolution(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            1.0 / self.steps as f64
        }
    }
}

fn compositions(total: usize, pos: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if pos + 1 == cur.len() {
        cur[pos] = total;
        f(cur);
        return;
    }
    for k in 0..=total {
        cur[pos] = k;
        compositions(total - k, pos + 1, cur, f);
    }
}

/// Power-independent outcome of one trial for one scheme.
pub trait RateSample {
    /// Writes the instantaneous rate of every user at transmit SNR `rho`
    /// under allocation `point`.
    fn rates(&self, rho: f64, point: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Default)]
struct CellAcc {
    rate: MeanAcc,
    outage: CountAcc,
}

impl Merge for CellAcc {
    fn merge(&mut self, o: Self) {
        self.rate.merge(o.rate);
        self.outage.merge(o.outage);
    }
}

/// Accumulator over (power, allocation, user) cells plus the sum rate.
#[derive(Debug, Clone)]
pub struct SweepAcc {
    cells: Vec<CellAcc>,
    sums: Vec<MeanAcc>,
    powers: usize,
    points: usize,
    users: usize,
}

impl Merge for SweepAcc {
    fn merge(&mut self, o: Self) {
        self.cells.merge(o.cells);
        self.sums.merge(o.sums);
    }
}

impl SweepAcc {
    pub fn new(powers: usize, points: usize, users: usize) -> Self {
        Self {
            cells: vec![CellAcc::default(); powers * points * users],
            sums: vec![MeanAcc::default(); powers * points],
            powers,
            points,
            users,
        }
    }

    fn bytes(powers: usize, points: usize, users: usize) -> usize {
        powers * points * (users * std::mem::size_of::<CellAcc>() + std::mem::size_of::<MeanAcc>())
    }

    /// Adds one trial's sample.
    pub fn push<S: RateSample + ?Sized>(
        &mut self,
        sample: &S,
        rhos: &[f64],
        grid: &AllocationGrid,
        targets: &[f64],
        scratch: &mut [f64],
    ) {
        for (p, &rho) in rhos.iter().enumerate() {
            for (g, point) in grid.points().iter().enumerate() {
                sample.rates(rho, point, scratch);
                let base = (p * self.points + g) * self.users;
                for (u, &r) in scratch.iter().enumerate() {
                    let cell = &mut self.cells[base + u];
                    cell.rate.push(r);
                    cell.outage.push(r < targets[u]);
                }
                self.sums[p * self.points + g].push(scratch.iter().sum());
            }
        }
    }
}

/// Estimate with a 95 % half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub half_width: f64,
}

impl From<&MeanAcc> for Estimate {
    fn from(m: &MeanAcc) -> Self {
        Self {
            value: m.mean(),
            half_width: m.half_width(),
        }
    }
}

impl From<Wilson> for Estimate {
    fn from(w: Wilson) -> Self {
        Self {
            value: w.centre,
            half_width: w.half_width,
        }
    }
}

/// Results of one scheme at one transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPoint {
    pub allocation: Vec<f64>,
    pub rates: Vec<Estimate>,
    /// Empirical outage: the raw fraction, with the Wilson half-width.
    pub outage: Vec<Estimate>,
    pub sum_rate: Estimate,
    pub jain: f64,
}

impl SweepAcc {
    /// Picks the best allocation per power.
    pub fn finish(&self, grid: &AllocationGrid, objective: Objective) -> Vec<PowerPoint> {
        (0..self.powers)
            .map(|p| {
                let means = |g: usize| -> Vec<f64> {
                    let base = (p * self.points + g) * self.users;
                    self.cells[base..base + self.users]
                        .iter()
                        .map(|c| c.rate.mean())
                        .collect()
                };
                let mut best = 0;
                let mut best_score = f64::NEG_INFINITY;
                for g in 0..self.points {
                    let s = objective.score(&means(g));
                    if s > best_score {
                        best_score = s;
                        best = g;
                    }
                }
                let base = (p * self.points + best) * self.users;
                let cells = &self.cells[base..base + self.users];
                let rates: Vec<Estimate> = cells.iter().map(|c| Estimate::from(&c.rate)).collect();
                let outage = cells
                    .iter()
                    .map(|c| Estimate {
                        value: c.outage.proportion(),
                        half_width: c.outage.wilson().half_width,
                    })
                    .collect();
                let values: Vec<f64> = rates.iter().map(|r| r.value).collect();
                PowerPoint {
                    allocation: grid.points()[best].clone(),
                    jain: jain_index(&values).unwrap_or(0.0),
                    rates,
                    outage,
                    sum_rate: Estimate::from(&self.sums[p * self.points + best]),
                }
            })
            .collect()
    }
}

/// Runs `trials` trials. `sample(trial)` builds the per-trial sample of
/// every scheme; each scheme's accumulator is fed with its own sample.
pub fn run_sweep<S, F>(
    trials: u64,
    rhos: &[f64],
    schemes: &[(&AllocationGrid, usize)],
    targets: &[Vec<f64>],
    objective: Objective,
    sample: F,
) -> Result<Vec<Vec<PowerPoint>>>
where
    S: RateSample,
    F: Fn(u64) -> Result<Vec<S>> + Sync,
{
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let bytes: usize = schemes
        .iter()
        .map(|(g, u)| SweepAcc::bytes(rhos.len(), g.len(), *u))
        .sum();
    let wave = (256 * 1024 * 1024 / bytes.max(1)).clamp(1, 64) as u64;
    let init = || -> Vec<SweepAcc> {
        schemes
            .iter()
            .map(|(g, u)| SweepAcc::new(rhos.len(), g.len(), *u))
            .collect()
    };
    let accs = try_run_trials(trials, wave, init, |t, accs| {
        let samples = sample(t)?;
        for ((acc, s), ((grid, users), tg)) in accs
            .iter_mut()
            .zip(&samples)
            .zip(schemes.iter().zip(targets))
        {
            let mut scratch = vec![0.0; *users];
            acc.push(s, rhos, grid, tg, &mut scratch);
        }
        Ok(())
    })?;
    Ok(accs
        .iter()
        .zip(schemes)
        .map(|(acc, (grid, _))| acc.finish(grid, objective))
        .collect())
}
