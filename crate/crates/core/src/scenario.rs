//! Experiment descriptions and the drivers that turn them into reports.
//!
//! A scenario is one TOML file:
//!
//! ```toml
//! name = "fig4a"
//! preset = "table1-row1"
//! n = 40
//! trials = 10000
//! seed = 1
//! schemes = ["proposed", "tdma", "pd-noma", "ris-noma"]
//! metrics = ["ergodic-rate", "sum-rate"]
//! target_rates = [0.75]
//!
//! [sweep]
//! from_dbm = 10
//! to_dbm = 50
//! step_db = 2
//!
//! [system]
//! correlated = false
//! phase_bits = 3
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{BenchmarkConfig, Scheme, SchemeSampler};
use crate::channel::{PathLossModel, PhaseIndexing};
use crate::error::{Error, Result};
use crate::outage::{outage_asymptotic, outage_exact, user_outage_params};
use crate::partition::{
    enumerate_partitions, find_n_thr, find_step, optimize_partition, Partition,
    PartitionSearchResult, SearchBounds, StepResult, ThresholdResult,
};
use crate::phy::{dbm_to_watts, PhaseModel, Placement, SystemConfig};
use crate::report::{user_label, MetricReport};
use crate::sweep::{run_sweep, AllocationGrid, Objective, DEFAULT_GRID_POINTS};

pub const DEFAULT_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    ErgodicRate,
    SumRate,
    /// Empirical outage.
    Outage,
    /// Closed-form outage of the proposed scheme's C2 users.
    OutageTheory,
    Jain,
    /// Selected time or power fraction.
    Allocation,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::ErgodicRate => "ergodic-rate",
            Metric::SumRate => "sum-rate",
            Metric::Outage => "outage",
            Metric::OutageTheory => "outage-theory",
            Metric::Jain => "jain",
            Metric::Allocation => "allocation",
        }
    }

    fn per_user(&self) -> bool {
        !matches!(self, Metric::SumRate | Metric::Jain)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Named user deployments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `M1 = 0, M2 = 2`.
    Table1Row1,
    /// `M1 = 1, M2 = 1`.
    Table1Row2,
    /// `M1 = 2, M2 = 2`.
    Table1Row3,
}

impl Preset {
    pub fn deployment(&self) -> Deployment {
        let p = Placement::new;
        match self {
            Preset::Table1Row1 => Deployment {
                c1: vec![],
                c2: vec![p(150.0, 146.0), p(100.0, 104.0)],
            },
            Preset::Table1Row2 => Deployment {
                c1: vec![p(150.0, 146.0)],
                c2: vec![p(100.0, 104.0)],
            },
            Preset::Table1Row3 => Deployment {
                c1: vec![p(150.0, 154.0), p(100.0, 104.0)],
                c2: vec![p(250.0, 254.0), p(200.0, 204.0)],
            },
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table1-row1" => Ok(Preset::Table1Row1),
            "table1-row2" => Ok(Preset::Table1Row2),
            "table1-row3" => Ok(Preset::Table1Row3),
            _ => Err(Error::config(format!(
                "unknown preset '{s}' (expected table1-row1, table1-row2 or table1-row3)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deployment {
    #[serde(default)]
    pub c1: Vec<Placement>,
    #[serde(default)]
    pub c2: Vec<Placement>,
}

/// Transmit-power grid: an explicit list or an arithmetic range.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub points_dbm: Option<Vec<f64>>,
    pub from_dbm: Option<f64>,
    pub to_dbm: Option<f64>,
    pub step_db: Option<f64>,
}

impl Sweep {
    pub fn powers_dbm(&self) -> Result<Vec<f64>> {
        let points = match (&self.points_dbm, self.from_dbm, self.to_dbm, self.step_db) {
            (Some(p), None, None, None) => p.clone(),
            (None, Some(from), Some(to), Some(step)) => {
                if !(step > 0.0) || !from.is_finite() || !to.is_finite() || to < from {
                    return Err(Error::config(format!(
                        "sweep range needs from_dbm <= to_dbm and step_db > 0, got {from}..{to} step {step}"
                    )));
                }
                let count = ((to - from) / step + 1e-9).floor() as usize + 1;
                (0..count).map(|k| from + k as f64 * step).collect()
            }
            _ => {
                return Err(Error::config(
                    "sweep: give either points_dbm or all of from_dbm, to_dbm and step_db",
                ))
            }
        };
        if points.is_empty() {
            return Err(Error::config("sweep is empty"));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(format!(
                "sweep must be finite and strictly increasing, got {points:?}"
            )));
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default = "default_noise_dbm")]
    pub noise_dbm: f64,
    #[serde(default = "default_carrier")]
    pub carrier_hz: f64,
    /// Direct-link gain at the reference distance, dB.
    #[serde(default = "default_ref_gain_db")]
    pub ref_gain_db: f64,
    #[serde(default = "default_ref_distance")]
    pub ref_distance: f64,
    #[serde(default = "default_exponent")]
    pub path_loss_exponent: f64,
    /// Element spacing in wavelengths.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    pub layout: Option<(usize, usize)>,
    #[serde(default)]
    pub indexing: PhaseIndexing,
    /// Elevation and azimuth of arrival at the RIS, radians.
    pub aoa: Option<(f64, f64)>,
    pub bs_ris_distance: Option<f64>,
    #[serde(default)]
    pub correlated: bool,
    /// Phase resolution in bits; absent for continuous phases.
    pub phase_bits: Option<u32>,
    /// Von Mises concentration; absent for error-free phases.
    pub kappa: Option<f64>,
    #[serde(default = "default_psk")]
    pub psk_order: u32,
    /// Sub-surface sizes per C2 user; absent for a uniform split.
    pub partition: Option<Vec<usize>>,
    /// Fixed C1 power allocation; absent to search for the fairest one.
    pub power_allocation: Option<Vec<f64>>,
}

fn default_noise_dbm() -> f64 {
    -90.0
}
fn default_carrier() -> f64 {
    1.8e9
}
fn default_ref_gain_db() -> f64 {
    -30.0
}
fn default_ref_distance() -> f64 {
    1.0
}
fn default_exponent() -> f64 {
    -3.5
}
fn default_spacing() -> f64 {
    0.5
}
fn default_psk() -> u32 {
    4
}

impl Default for SystemSection {
    fn default() -> Self {
        toml::from_str("").expect("every field has a default")
    }
}

/// Inputs of the three partitioning algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitioningSection {
    pub q: f64,
    pub epsilon: f64,
    pub r_bar: f64,
    /// Overrides the threshold search.
    pub n_thr: Option<usize>,
    /// Overrides the step search.
    pub step: Option<usize>,
    /// Realizations for the step search.
    #[serde(default = "default_step_trials")]
    pub step_trials: u64,
}

fn default_step_trials() -> u64 {
    DEFAULT_TRIALS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub preset: Option<String>,
    pub deployment: Option<Deployment>,
    /// RIS element count.
    pub n: usize,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    /// Target rate `γ*` of every user (one value) or of each user in C1-then-C2
    /// order.
    #[serde(default = "default_targets")]
    pub target_rates: Vec<f64>,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    pub sweep: Sweep,
    #[serde(default)]
    pub system: SystemSection,
    pub partitioning: Option<PartitioningSection>,
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}
fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Proposed]
}
fn default_metrics() -> Vec<Metric> {
    vec![
        Metric::ErgodicRate,
        Metric::SumRate,
        Metric::Outage,
        Metric::Jain,
    ]
}
fn default_targets() -> Vec<f64> {
    vec![1.0]
}
fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

/// Command-line overrides of scenario fields.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub correlated: Option<bool>,
    /// `Some(None)` selects continuous phases.
    pub phase_bits: Option<Option<u32>>,
    /// `Some(None)` removes the phase error.
    pub kappa: Option<Option<f64>>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = o.trials {
            self.trials = t;
        }
        if let Some(c) = o.correlated {
            self.system.correlated = c;
        }
        if let Some(b) = o.phase_bits {
            self.system.phase_bits = b;
        }
        if let Some(k) = o.kappa {
            self.system.kappa = k;
        }
        self.validate()
    }

    pub fn deployment(&self) -> Result<Deployment> {
        match (&self.preset, &self.deployment) {
            (Some(p), None) => Ok(p.parse::<Preset>()?.deployment()),
            (None, Some(d)) => Ok(d.clone()),
            (Some(_), Some(_)) => Err(Error::config(
                "give either preset or [deployment], not both",
            )),
            (None, None) => Err(Error::config(
                "missing user deployment: set preset or [deployment]",
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("schemes must not be empty"));
        }
        if has_duplicates(&self.schemes) || has_duplicates(&self.metrics) {
            return Err(Error::config("schemes and metrics must not repeat"));
        }
        if self
            .target_rates
            .iter()
            .any(|t| !(t.is_finite() && *t >= 0.0))
        {
            return Err(Error::config(format!(
                "target rates must be finite and >= 0, got {:?}",
                self.target_rates
            )));
        }
        if self.grid_points < 2 {
            return Err(Error::config("grid_points must be at least 2"));
        }
        if let Some(p) = &self.partitioning {
            if !(p.q > 0.0) || !(p.epsilon > 0.0 && p.epsilon < 1.0) || !(p.r_bar > 0.0) {
                return Err(Error::config(
                    "partitioning needs q > 0, 0 < epsilon < 1 and r_bar > 0",
                ));
            }
            if p.step_trials == 0 || p.n_thr == Some(0) || p.step == Some(0) {
                return Err(Error::config(
                    "step_trials, n_thr and step must be at least 1",
                ));
            }
        }
        let d = self.deployment()?;
        self.sweep.powers_dbm()?;
        self.targets(d.c1.len() + d.c2.len())?;
        self.system_config()?;
        Ok(())
    }

    /// Target rate of every user, C1 first.
    pub fn targets(&self, users: usize) -> Result<Vec<f64>> {
        match self.target_rates.len() {
            1 => Ok(vec![self.target_rates[0]; users]),
            k if k == users => Ok(self.target_rates.clone()),
            k => Err(Error::config(format!("{k} target rates for {users} users"))),
        }
    }

    pub fn system_config(&self) -> Result<SystemConfig> {
        let d = self.deployment()?;
        let s = &self.system;
        let mut cfg = SystemConfig::new(d.c1, d.c2, self.n)?;
        cfg.noise_power = dbm_to_watts(s.noise_dbm);
        cfg.carrier_hz = s.carrier_hz;
        cfg.path_loss = PathLossModel {
            ref_gain: 10f64.powf(s.ref_gain_db / 10.0),
            ref_distance: s.ref_distance,
            exponent: s.path_loss_exponent,
        };
        cfg.spacing = s.spacing;
        cfg.layout = s.layout;
        cfg.indexing = s.indexing;
        cfg.angles = s.aoa;
        cfg.bs_ris_distance = s.bs_ris_distance;
        cfg.correlated = s.correlated;
        let levels = match s.phase_bits {
            Some(b) if !(1..=16).contains(&b) => {
                return Err(Error::config(format!(
                    "phase_bits must be in 1..=16, got {b}"
                )));
            }
            b => b.map(|b| 1u32 << b),
        };
        cfg.phase = PhaseModel {
            levels,
            kappa: s.kappa,
        };
        cfg.psk_order = s.psk_order;
        if let Some(p) = &s.partition {
            cfg.partition = Partition::new(p.clone())?;
        }
        cfg.power_allocation = s.power_allocation.clone();
        cfg.seed = self.seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn has_duplicates<T: PartialEq>(xs: &[T]) -> bool {
    xs.iter().enumerate().any(|(i, x)| xs[..i].contains(x))
}

/// Monte Carlo sweep of every configured scheme over the power grid.
///
/// Rows are ordered by scheme, then user (C1, C2, `all`), then power, then
/// metric in configuration order.
pub fn run_scenario(sc: &Scenario) -> Result<MetricReport> {
    let cfg = sc.system_config()?;
    let powers = sc.sweep.powers_dbm()?;
    let rhos: Vec<f64> = powers
        .iter()
        .map(|&p| dbm_to_watts(p) / cfg.noise_power)
        .collect();
    let users = cfg.m1() + cfg.m2();
    let targets = sc.targets(users)?;
    let grids = sc
        .schemes
        .iter()
        .map(|&scheme| {
            BenchmarkConfig {
                scheme,
                grid_points: sc.grid_points,
                objective: sc.objective,
            }
            .grid(&cfg)
        })
        .collect::<Result<Vec<AllocationGrid>>>()?;
    let layout: Vec<(&AllocationGrid, usize)> = grids.iter().map(|g| (g, users)).collect();
    let sampler = SchemeSampler::new(&cfg, &sc.schemes)?;
    let results = run_sweep(
        sc.trials,
        &rhos,
        &layout,
        &vec![targets.clone(); sc.schemes.len()],
        sc.objective,
        |t| sampler.sample(t),
    )?;

    let mut report = MetricReport::default();
    for (scheme, points) in sc.schemes.iter().zip(&results) {
        let name = scheme.name();
        for (u, &target) in targets.iter().enumerate() {
            let label = user_label(u, cfg.m1());
            for (&p_dbm, pt) in powers.iter().zip(points) {
                for metric in sc.metrics.iter().filter(|m| m.per_user()) {
                    let (value, hw) = match metric {
                        Metric::ErgodicRate => (pt.rates[u].value, pt.rates[u].half_width),
                        Metric::Outage => (pt.outage[u].value, pt.outage[u].half_width),
                        Metric::Allocation => match pt.allocation.get(u) {
                            Some(&a) => (a, 0.0),
                            None => continue,
                        },
                        Metric::OutageTheory => {
                            if *scheme != Scheme::Proposed || u < cfg.m1() {
                                continue;
                            }
                            let params = user_outage_params(
                                &cfg,
                                &cfg.partition,
                                u - cfg.m1(),
                                dbm_to_watts(p_dbm),
                                target,
                            )?;
                            (outage_exact(&params)?, 0.0)
                        }
                        Metric::SumRate | Metric::Jain => unreachable!("filtered"),
                    };
                    report.push(&sc.name, name, &label, p_dbm, metric.name(), value, hw);
                }
            }
        }
        for (&p_dbm, pt) in powers.iter().zip(points) {
            for metric in sc.metrics.iter().filter(|m| !m.per_user()) {
                let (value, hw) = match metric {
                    Metric::SumRate => (pt.sum_rate.value, pt.sum_rate.half_width),
                    _ => (pt.jain, 0.0),
                };
                report.push(&sc.name, name, "all", p_dbm, metric.name(), value, hw);
            }
        }
    }
    Ok(report)
}

/// Best partition at one transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSearch {
    pub p_dbm: f64,
    pub result: PartitionSearchResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitioningReport {
    pub threshold: ThresholdResult,
    pub step: StepResult,
    pub bounds: SearchBounds,
    /// Size of the bounded candidate set.
    pub candidates: usize,
    pub searches: Vec<PowerSearch>,
}

impl PartitioningReport {
    pub fn to_report(&self, scenario: &str, m2: usize) -> MetricReport {
        let mut r = MetricReport::default();
        for s in &self.searches {
            let p = s.p_dbm;
            r.push(
                scenario,
                "proposed",
                "all",
                p,
                "n-thr",
                self.bounds.n_thr as f64,
                0.0,
            );
            r.push(
                scenario,
                "proposed",
                "all",
                p,
                "step",
                self.bounds.step as f64,
                0.0,
            );
            r.push(
                scenario,
                "proposed",
                "all",
                p,
                "candidates",
                self.candidates as f64,
                0.0,
            );
            r.push(scenario, "proposed", "all", p, "jain", s.result.jain, 0.0);
        }
        for m in 0..m2 {
            let label = user_label(m, 0);
            for s in &self.searches {
                let best = &s.result.candidates[s.result.best_index];
                r.push(
                    scenario,
                    "proposed",
                    &label,
                    s.p_dbm,
                    "partition",
                    best.partition.sizes()[m] as f64,
                    0.0,
                );
                let rate = best.rates[m];
                r.push(
                    scenario,
                    "proposed",
                    &label,
                    s.p_dbm,
                    "ergodic-rate",
                    rate.value,
                    rate.half_width,
                );
            }
        }
        r
    }
}

/// Threshold search, step search, then the fairness search at every power
/// of the sweep.
pub fn run_partitioning(sc: &Scenario) -> Result<PartitioningReport> {
    let cfg = sc.system_config()?;
    if cfg.m2() < 2 {
        return Err(Error::config(
            "partitioning needs at least two users in front of the RIS",
        ));
    }
    let p = sc
        .partitioning
        .as_ref()
        .ok_or_else(|| Error::config("missing [partitioning] section"))?;
    let threshold = find_n_thr(cfg.n, cfg.m2(), p.q, p.epsilon)?;
    if threshold.capped {
        log::warn!("threshold search hit the cap N/M2 = {}", threshold.n_thr);
    }
    let n_thr = p.n_thr.unwrap_or(threshold.n_thr);
    if n_thr * cfg.m2() > cfg.n {
        return Err(Error::config(format!(
            "n_thr = {n_thr} leaves too few elements for {} users",
            cfg.m2()
        )));
    }
    let step = find_step(cfg.n, cfg.m2(), n_thr, p.r_bar, p.step_trials, sc.seed)?;
    let b = p.step.unwrap_or(step.step);
    let bounds = SearchBounds {
        n_thr,
        step: b,
        q: p.q,
        epsilon: p.epsilon,
        r_bar: p.r_bar,
    };
    let candidates = enumerate_partitions(cfg.n, cfg.m2(), n_thr, b).len();
    let searches = sc
        .sweep
        .powers_dbm()?
        .into_iter()
        .map(|p_dbm| {
            Ok(PowerSearch {
                p_dbm,
                result: optimize_partition(&cfg, &bounds, dbm_to_watts(p_dbm), sc.trials)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PartitioningReport {
        threshold,
        step,
        bounds,
        candidates,
        searches,
    })
}

/// Closed-form outage of every C2 user under the configured partition.
pub fn outage_table(sc: &Scenario) -> Result<MetricReport> {
    let cfg = sc.system_config()?;
    let targets = sc.targets(cfg.m1() + cfg.m2())?;
    let powers = sc.sweep.powers_dbm()?;
    let mut report = MetricReport::default();
    for m in 0..cfg.m2() {
        let label = user_label(m, 0);
        for &p_dbm in &powers {
            let params = user_outage_params(
                &cfg,
                &cfg.partition,
                m,
                dbm_to_watts(p_dbm),
                targets[cfg.m1() + m],
            )?;
            report.push(
                &sc.name,
                "proposed",
                &label,
                p_dbm,
                "outage-exact",
                outage_exact(&params)?,
                0.0,
            );
            report.push(
                &sc.name,
                "proposed",
                &label,
                p_dbm,
                "outage-asymptotic",
                outage_asymptotic(&params)?,
                0.0,
            );
        }
    }
    Ok(report)
}
