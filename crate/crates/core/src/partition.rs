//! Partitioning the RIS among the users in front of it: fairness index,
//! search-space bounds and the exhaustive fairness search.

use std::f64::consts::PI;

use crate::channel::complex_normal;
use crate::error::{Error, Result};
use crate::mc::{run_trials, trial_rng, try_run_trials, MeanAcc, Stream, BLOCKS_PER_WAVE};
use crate::phy::{c2_links, SubSurfaces, SystemConfig, TrialState};
use crate::sweep::Estimate;

/// Sub-surface sizes, one per C2 user.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition(Vec<usize>);

impl Partition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::config("a partition needs at least one sub-surface"));
        }
        if sizes.contains(&0) {
            return Err(Error::config(format!(
                "empty sub-surface in partition {sizes:?}"
            )));
        }
        Ok(Self(sizes))
    }

    /// Near-equal split, larger parts first.
    pub fn uniform(n: usize, m2: usize) -> Result<Self> {
        if m2 == 0 || n < m2 {
            return Err(Error::config(format!(
                "cannot split {n} elements among {m2} users"
            )));
        }
        let (q, r) = (n / m2, n % m2);
        Self::new((0..m2).map(|i| q + usize::from(i < r)).collect())
    }

    pub fn sizes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn is_non_increasing(&self) -> bool {
        self.0.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn check(&self, n: usize, m2: usize) -> Result<()> {
        if self.len() != m2 {
            return Err(Error::config(format!(
                "partition {:?} has {} parts for {m2} users",
                self.0,
                self.len()
            )));
        }
        if self.total() != n {
            return Err(Error::config(format!(
                "partition {:?} sums to {}, not {n}",
                self.0,
                self.total()
            )));
        }
        Ok(())
    }

    /// Hands the `k`-th largest size to the `k`-th farthest user (by RIS
    /// distance, ties by index).
    pub fn assign_by_distance(sizes: &[usize], ris_distances: &[f64]) -> Result<Self> {
        if sizes.len() != ris_distances.len() {
            return Err(Error::usage("one size per user is required"));
        }
        let mut sorted = sizes.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let mut rank: Vec<usize> = (0..sizes.len()).collect();
        rank.sort_by(|&a, &b| {
            ris_distances[b]
                .total_cmp(&ris_distances[a])
                .then(a.cmp(&b))
        });
        let mut out = vec![0; sizes.len()];
        for (k, &user) in rank.iter().enumerate() {
            out[user] = sorted[k];
        }
        Self::new(out)
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        write!(f, "{}", parts.join("/"))
    }
}

/// Jain's fairness index `(mean)² / mean of squares`.
pub fn jain_index(rates: &[f64]) -> Result<f64> {
    if rates.is_empty() || rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::domain(format!(
            "rates must be finite and non-negative: {rates:?}"
        )));
    }
    let sum: f64 = rates.iter().sum();
    let sum_sq: f64 = rates.iter().map(|r| r * r).sum();
    if sum_sq == 0.0 {
        return Err(Error::domain("Jain index of all-zero rates is undefined"));
    }
    Ok(sum * sum / (rates.len() as f64 * sum_sq))
}

/// Bounds on the search space of the partition search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBounds {
    pub n_thr: usize,
    pub step: usize,
    pub q: f64,
    pub epsilon: f64,
    pub r_bar: f64,
}

/// High-SNR probability that the interference from `n − k` foreign elements,
/// scaled by `q`, exceeds the amplification of `k` own elements.
pub fn sipc_probability(n: usize, k: usize, q: f64) -> f64 {
    let k = k as f64;
    let mu_sq = k * k * PI / 4.0;
    let s_m = k * (4.0 - PI) / 4.0;
    let s_i = 0.5 * q * (n as f64 - k);
    let total = s_m + s_i;
    (s_i / total).sqrt() * (-mu_sq / (2.0 * total)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub n_thr: usize,
    /// Probability at the returned value.
    pub probability: f64,
    /// No count up to the cap met the target; the cap was returned.
    pub capped: bool,
    pub iterations: usize,
}

/// Smallest per-user element count whose interference-excess probability is
/// at most `epsilon`, searched upward from one and capped at `⌊N/M₂⌋`.
pub fn find_n_thr(n: usize, m2: usize, q: f64, epsilon: f64) -> Result<ThresholdResult> {
    if m2 == 0 || n < m2 {
        return Err(Error::config(format!(
            "cannot split {n} elements among {m2} users"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) || !(q > 0.0) {
        return Err(Error::domain(format!(
            "need 0 < epsilon < 1 and q > 0, got {epsilon}, {q}"
        )));
    }
    let cap = n / m2;
    let mut k = 1;
    let mut p = sipc_probability(n, k, q);
    let mut iterations = 1;
    while p > epsilon && k < cap {
        k += 1;
        iterations += 1;
        p = sipc_probability(n, k, q);
    }
    let capped = p > epsilon;
    if capped {
        log::warn!("no sub-surface size up to {cap} meets epsilon = {epsilon} (reached {p})");
    }
    Ok(ThresholdResult {
        n_thr: k,
        probability: p,
        capped,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub step: usize,
    /// Rate gap `R̄(N_thr + b) − R̄(N_thr)` for every `b` examined.
    pub gaps: Vec<f64>,
    pub capped: bool,
}

/// Interference-limited ergodic rate for every own-element count
/// `k ∈ [lo, hi]`, with unit gains and common draws across `k`.
pub fn interference_limited_rates(
    n: usize,
    lo: usize,
    hi: usize,
    trials: u64,
    seed: u64,
) -> Vec<MeanAcc> {
    let width = hi + 1 - lo;
    run_trials(
        trials,
        || vec![MeanAcc::default(); width],
        |t, acc| {
            let mut rng = trial_rng(seed, Stream::StepSearch, t);
            let mut beta = vec![0.0; n + 1];
            let mut inter = vec![num_complex::Complex64::new(0.0, 0.0); n + 1];
            for i in 0..n {
                beta[i + 1] = beta[i] + complex_normal(&mut rng).norm();
            }
            for i in 0..n {
                inter[i + 1] = inter[i] + complex_normal(&mut rng);
            }
            for (j, a) in acc.iter_mut().enumerate() {
                let k = lo + j;
                let signal = beta[k] * beta[k];
                let noise = inter[n - k].norm_sqr();
                a.push((1.0 + signal / noise).log2());
            }
        },
    )
}

/// Step size of the element-count grid: the first `b` whose rate gain over
/// `N_thr` exceeds `r_bar`, or the cap `N − M₂ N_thr`.
pub fn find_step(
    n: usize,
    m2: usize,
    n_thr: usize,
    r_bar: f64,
    trials: u64,
    seed: u64,
) -> Result<StepResult> {
    if !(r_bar > 0.0) {
        return Err(Error::domain(format!(
            "rate resolution must be positive, got {r_bar}"
        )));
    }
    if n_thr == 0 || m2 * n_thr > n {
        return Err(Error::config(format!(
            "{m2} users with {n_thr} elements exceed N = {n}"
        )));
    }
    let cap = (n - m2 * n_thr).max(1);
    let hi = (n_thr + cap).min(n - 1).max(n_thr);
    let rates = interference_limited_rates(n, n_thr, hi, trials, seed);
    let base = rates[0].mean();
    let gap = |b: usize| rates.get(b).map_or(f64::INFINITY, |r| r.mean() - base);
    let mut b = 1;
    let mut gaps = vec![gap(b)];
    while gaps[b - 1] <= r_bar && b < cap {
        b += 1;
        gaps.push(gap(b));
    }
    let capped = gaps[b - 1] <= r_bar;
    Ok(StepResult {
        step: b,
        gaps,
        capped,
    })
}

/// Non-increasing size tuples whose first `M₂ − 1` entries lie on
/// `{N_thr, N_thr + b, …} ∩ [N_thr, N − N_thr(M₂−1)]` and whose last entry
/// takes the remainder, which must lie in `[N_thr, previous entry]`.
/// Tuples come in ascending lexicographic order.
pub fn enumerate_partitions(n: usize, m2: usize, n_thr: usize, step: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if m2 == 0 || n_thr == 0 || step == 0 || m2 * n_thr > n {
        return out;
    }
    if m2 == 1 {
        out.push(vec![n]);
        return out;
    }
    let hi = n - n_thr * (m2 - 1);
    let grid: Vec<usize> = (n_thr..=hi).step_by(step).collect();
    let mut cur = Vec::with_capacity(m2);
    fn rec(
        grid: &[usize],
        remaining: usize,
        slots: usize,
        n_thr: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if slots == 1 {
            let prev = *cur.last().unwrap_or(&usize::MAX);
            if remaining >= n_thr && remaining <= prev {
                cur.push(remaining);
                out.push(cur.clone());
                cur.pop();
            }
            return;
        }
        let prev = *cur.last().unwrap_or(&usize::MAX);
        for &v in grid {
            if v > prev || v > remaining {
                break;
            }
            // The remaining slots need at least n_thr each.
            if remaining - v < n_thr * (slots - 1) {
                break;
            }
            cur.push(v);
            rec(grid, remaining - v, slots - 1, n_thr, cur, out);
            cur.pop();
        }
    }
    rec(&grid, n, m2, n_thr, &mut cur, &mut out);
    out
}

/// Every composition of `n` into `m2` positive parts, in lexicographic order.
pub fn all_compositions(n: usize, m2: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if m2 == 0 || n < m2 {
        return out;
    }
    fn rec(remaining: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            cur.push(remaining);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in 1..=remaining - (slots - 1) {
            cur.push(v);
            rec(remaining - v, slots - 1, cur, out);
            cur.pop();
        }
    }
    rec(n, m2, &mut Vec::new(), &mut out);
    out
}

/// One evaluated candidate of the partition search.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub partition: Partition,
    pub rates: Vec<Estimate>,
    pub jain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSearchResult {
    pub best: Partition,
    pub best_index: usize,
    pub jain: f64,
    pub candidates: Vec<Candidate>,
}

/// Ergodic rates of the C2 users for every candidate partition at transmit
/// power `power` (watts). All candidates see the same channel draws.
pub fn evaluate_partitions(
    cfg: &SystemConfig,
    candidates: &[Partition],
    power: f64,
    trials: u64,
) -> Result<Vec<Candidate>> {
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    for p in candidates {
        p.check(cfg.n, cfg.m2())?;
    }
    let model = cfg.channel_model()?;
    let rho = power / cfg.noise_power;
    let subs: Vec<SubSurfaces> = candidates.iter().map(SubSurfaces::new).collect();
    let m2 = cfg.m2();
    let width = candidates.len() * m2;
    let acc = try_run_trials(
        trials,
        BLOCKS_PER_WAVE,
        || vec![MeanAcc::default(); width],
        |t, acc| {
            let state = TrialState::for_trial(cfg, t)?;
            let fading = model.realize(&state.white, cfg.correlated);
            for (c, s) in subs.iter().enumerate() {
                let links = c2_links(cfg, &model, &fading, &state, s)?;
                for (m, l) in links.iter().enumerate() {
                    acc[c * m2 + m].push((1.0 + l.sinr(rho)).log2());
                }
            }
            Ok(())
        },
    )?;
    Ok(candidates
        .iter()
        .enumerate()
        .map(|(c, p)| {
            let rates: Vec<Estimate> = acc[c * m2..(c + 1) * m2]
                .iter()
                .map(Estimate::from)
                .collect();
            let means: Vec<f64> = rates.iter().map(|r| r.value).collect();
            Candidate {
                partition: p.clone(),
                jain: jain_index(&means).unwrap_or(0.0),
                rates,
            }
        })
        .collect())
}

/// Fairest candidate; ties go to the earliest.
pub fn select_best(candidates: Vec<Candidate>) -> Result<PartitionSearchResult> {
    let mut best_index = None;
    for (i, c) in candidates.iter().enumerate() {
        if best_index.is_none_or(|b: usize| c.jain > candidates[b].jain) {
            best_index = Some(i);
        }
    }
    let best_index = best_index.ok_or_else(|| Error::config("no feasible partition"))?;
    Ok(PartitionSearchResult {
        best: candidates[best_index].partition.clone(),
        jain: candidates[best_index].jain,
        best_index,
        candidates,
    })
}

/// Exhaustive fairness search over the bounded candidate set.
pub fn optimize_partition(
    cfg: &SystemConfig,
    bounds: &SearchBounds,
    power: f64,
    trials: u64,
) -> Result<PartitionSearchResult> {
    let tuples = enumerate_partitions(cfg.n, cfg.m2(), bounds.n_thr, bounds.step);
    if tuples.is_empty() {
        return Err(Error::config(format!(
            "no partition of {} elements among {} users with N_thr = {} and step {}",
            cfg.n,
            cfg.m2(),
            bounds.n_thr,
            bounds.step
        )));
    }
    let r: Vec<f64> = cfg.c2.iter().map(|p| p.ris_distance).collect();
    let candidates = tuples
        .iter()
        .map(|t| Partition::assign_by_distance(t, &r))
        .collect::<Result<Vec<_>>>()?;
    select_best(evaluate_partitions(cfg, &candidates, power, trials)?)
}

/// Fairness search over every composition, without bounds or ordering.
pub fn exhaustive_partition_search(
    cfg: &SystemConfig,
    power: f64,
    trials: u64,
) -> Result<PartitionSearchResult> {
    let candidates = all_compositions(cfg.n, cfg.m2())
        .into_iter()
        .map(Partition::new)
        .collect::<Result<Vec<_>>>()?;
    select_best(evaluate_partitions(cfg, &candidates, power, trials)?)
}
