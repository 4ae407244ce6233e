//! Benchmark schemes evaluated on the same channel draws as the proposed
//! partitioned-RIS scheme: TDMA with and without the RIS, power-domain NOMA
//! over the direct links, and a single-surface RIS-NOMA approximation.
//!
//! User order in every rate vector is C1 users first, then C2 users, each in
//! configuration order.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, FadingDraw};
use crate::error::{Error, Result};
use crate::phy::{c2_links, sic_sinrs, PhaseModel, SubSurfaces, SystemConfig, TrialState};
use crate::sweep::{AllocationGrid, Objective, RateSample, MAX_GRID_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Proposed,
    Tdma,
    RisTdma,
    PdNoma,
    RisNoma,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Proposed,
        Scheme::Tdma,
        Scheme::RisTdma,
        Scheme::PdNoma,
        Scheme::RisNoma,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Tdma => "tdma",
            Scheme::RisTdma => "ris-tdma",
            Scheme::PdNoma => "pd-noma",
            Scheme::RisNoma => "ris-noma",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown scheme '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkConfig {
    pub scheme: Scheme,
    /// Grid points per simplex axis of the time/power allocation search.
    pub grid_points: usize,
    pub objective: Objective,
}

impl BenchmarkConfig {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            grid_points: crate::sweep::DEFAULT_GRID_POINTS,
            objective: Objective::Jain,
        }
    }

    /// Allocation candidates. The proposed scheme only allocates power among
    /// the C1 users; a configured allocation is used as is.
    pub fn grid(&self, cfg: &SystemConfig) -> Result<AllocationGrid> {
        match self.scheme {
            Scheme::Proposed => match &cfg.power_allocation {
                Some(z) => Ok(AllocationGrid::fixed(z.clone())),
                None if cfg.m1() == 0 => Ok(AllocationGrid::fixed(Vec::new())),
                None => AllocationGrid::simplex(cfg.m1(), self.grid_points, MAX_GRID_SIZE),
            },
            _ => AllocationGrid::simplex(cfg.m1() + cfg.m2(), self.grid_points, MAX_GRID_SIZE),
        }
    }
}

/// Direct-link gains `|ṽ|²` and `|v|²`.
pub fn direct_gains(fading: &FadingDraw) -> Vec<f64> {
    fading
        .c1
        .iter()
        .chain(&fading.c2)
        .map(|u| u.bs.norm_sqr())
        .collect()
}

/// Reflection phases of the whole surface that co-phase the cascaded
/// channel of `target` with its direct link.
pub fn full_surface_phases(
    fading: &FadingDraw,
    los: &[Complex64],
    target: usize,
    model: &PhaseModel,
    errors: &[f64],
) -> Result<Vec<f64>> {
    let user = fading
        .c2
        .get(target)
        .ok_or_else(|| Error::usage(format!("C2 user {target} does not exist")))?;
    let theta = user.bs.arg();
    Ok(user
        .ris
        .iter()
        .zip(los)
        .enumerate()
        .map(|(n, (g, h))| {
            model.quantize(theta - g.arg() - h.arg()) + errors.get(n).copied().unwrap_or(0.0)
        })
        .collect())
}

/// Effective gain `|v + Σ g h e^{jΦ}|²` of every C2 user under common
/// surface phases.
pub fn reflected_gains(fading: &FadingDraw, los: &[Complex64], phases: &[f64]) -> Vec<f64> {
    fading
        .c2
        .iter()
        .map(|u| {
            let cascade: Complex64 = u
                .ris
                .iter()
                .zip(los)
                .zip(phases)
                .map(|((g, h), &p)| g * h * Complex64::from_polar(1.0, p))
                .sum();
            (u.bs + cascade).norm_sqr()
        })
        .collect()
}

/// `τ_m log2(1 + ρ g_m)`.
pub fn tdma_rates(gains: &[f64], tau: &[f64], rho: f64, out: &mut [f64]) {
    for ((o, g), t) in out.iter_mut().zip(gains).zip(tau) {
        *o = t * (rho * g).ln_1p() / std::f64::consts::LN_2;
    }
}

/// Downlink NOMA rates with SIC in ascending gain order.
pub fn noma_rates(gains: &[f64], zeta: &[f64], rho: f64, out: &mut [f64]) {
    sic_sinrs(gains, zeta, rho, out);
    for o in out.iter_mut() {
        *o = o.ln_1p() / std::f64::consts::LN_2;
    }
}

/// Power-independent per-trial outcome of one scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeSample {
    /// C2 `(A, I)` pairs and C1 direct gains.
    Proposed {
        c1: Vec<f64>,
        c2: Vec<(f64, f64)>,
    },
    Tdma(Vec<f64>),
    Noma(Vec<f64>),
}

impl RateSample for SchemeSample {
    fn rates(&self, rho: f64, point: &[f64], out: &mut [f64]) {
        match self {
            SchemeSample::Proposed { c1, c2 } => {
                let (head, tail) = out.split_at_mut(c1.len());
                noma_rates(c1, point, rho, head);
                for (o, &(a, i)) in tail.iter_mut().zip(c2) {
                    *o = (a / (i + 1.0 / rho)).ln_1p() / std::f64::consts::LN_2;
                }
            }
            SchemeSample::Tdma(g) => tdma_rates(g, point, rho, out),
            SchemeSample::Noma(g) => noma_rates(g, point, rho, out),
        }
    }
}

/// C2 user served by the RIS-NOMA surface: the one farthest from the RIS,
/// ties to the lower index.
pub fn ris_noma_target(cfg: &SystemConfig) -> usize {
    let mut best = 0;
    for (m, p) in cfg.c2.iter().enumerate() {
        if p.ris_distance > cfg.c2[best].ris_distance {
            best = m;
        }
    }
    best
}

/// Builds the per-trial samples of a list of schemes from one shared draw.
#[derive(Debug, Clone)]
pub struct SchemeSampler {
    cfg: SystemConfig,
    model: ChannelModel,
    subs: SubSurfaces,
    schemes: Vec<Scheme>,
    target: usize,
}

impl SchemeSampler {
    pub fn new(cfg: &SystemConfig, schemes: &[Scheme]) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            model: cfg.channel_model()?,
            subs: SubSurfaces::new(&cfg.partition),
            schemes: schemes.to_vec(),
            target: ris_noma_target(cfg),
            cfg: cfg.clone(),
        })
    }

    pub fn users(&self) -> usize {
        self.cfg.m1() + self.cfg.m2()
    }

    pub fn sample(&self, trial: u64) -> Result<Vec<SchemeSample>> {
        let cfg = &self.cfg;
        let state = TrialState::for_trial(cfg, trial)?;
        let fading = self.model.realize(&state.white, cfg.correlated);
        let los = &self.model.los;
        let mut correlated = None;
        self.schemes
            .iter()
            .map(|s| {
                Ok(match s {
                    Scheme::Proposed => SchemeSample::Proposed {
                        c1: fading.c1.iter().map(|u| u.bs.norm_sqr()).collect(),
                        c2: c2_links(cfg, &self.model, &fading, &state, &self.subs)?
                            .iter()
                            .map(|l| (l.signal, l.interference))
                            .collect(),
                    },
                    Scheme::Tdma => SchemeSample::Tdma(direct_gains(&fading)),
                    Scheme::RisTdma => {
                        let mut g = direct_gains(&fading);
                        for m in 0..cfg.m2() {
                            let phases = full_surface_phases(
                                &fading,
                                los,
                                m,
                                &cfg.phase,
                                &state.phase_errors,
                            )?;
                            g[cfg.m1() + m] = reflected_gains(&fading, los, &phases)[m];
                        }
                        SchemeSample::Tdma(g)
                    }
                    Scheme::PdNoma => SchemeSample::Noma(direct_gains(&fading)),
                    Scheme::RisNoma => {
                        let f = if cfg.correlated {
                            &fading
                        } else {
                            correlated.get_or_insert_with(|| self.model.realize(&state.white, true))
                        };
                        let phases = full_surface_phases(
                            f,
                            los,
                            self.target,
                            &cfg.phase,
                            &state.phase_errors,
                        )?;
                        let mut g: Vec<f64> = f.c1.iter().map(|u| u.bs.norm_sqr()).collect();
                        g.extend(reflected_gains(f, los, &phases));
                        SchemeSample::Noma(g)
                    }
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::UserFading;
    use crate::partition::jain_index;
    use crate::phy::Placement;
    use crate::sweep::DEFAULT_GRID_POINTS;

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("noma".parse::<Scheme>().is_err());
    }

    #[test]
    fn tdma_degenerate_slot() {
        let mut out = [0.0; 2];
        tdma_rates(&[1.0, 2.0], &[1.0, 0.0], 10.0, &mut out);
        assert!(out[0] > 0.0);
        assert_eq!(out[1], 0.0);
    }

    fn best_point(grid: &AllocationGrid, sample: &SchemeSample, rho: f64) -> (Vec<f64>, Vec<f64>) {
        let n = grid.points()[0].len();
        let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
        for p in grid.points() {
            let mut r = vec![0.0; n];
            sample.rates(rho, p, &mut r);
            let j = jain_index(&r).unwrap_or(0.0);
            if j > best.0 {
                best = (j, p.clone(), r);
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn tdma_grid_search() {
        let grid = AllocationGrid::simplex(2, DEFAULT_GRID_POINTS, MAX_GRID_SIZE).unwrap();
        let (tau, rates) = best_point(&grid, &SchemeSample::Tdma(vec![1.0, 1.0]), 10.0);
        assert_eq!(tau, vec![0.5, 0.5]);
        assert!((jain_index(&rates).unwrap() - 1.0).abs() < 1e-12);
        // Linear regime: rate ≈ τ ρ g / ln 2.
        let (tau, _) = best_point(&grid, &SchemeSample::Tdma(vec![1.0, 4.0]), 1e-3);
        assert!(tau[0] > tau[1]);
        assert!((tau[0] - 0.8).abs() < 0.011);
    }

    #[test]
    fn noma_properties() {
        let mut out = [0.0; 1];
        noma_rates(&[2.0], &[1.0], 5.0, &mut out);
        assert!((out[0] - 11f64.log2()).abs() < 1e-12);
        let grid = AllocationGrid::simplex(2, DEFAULT_GRID_POINTS, MAX_GRID_SIZE).unwrap();
        let (_, rates) = best_point(&grid, &SchemeSample::Noma(vec![1.0, 1.0]), 10.0);
        assert!((rates[0] - rates[1]).abs() / rates[0] < 0.05);
        let mut prev = 0.0;
        for k in 0..=100 {
            let z = k as f64 / 100.0;
            let mut r = [0.0; 2];
            noma_rates(&[0.5, 3.0], &[z, 1.0 - z], 20.0, &mut r);
            assert!(r[0] >= prev);
            prev = r[0];
        }
    }

    fn draw(bs: &[f64], ris: &[Vec<Complex64>]) -> FadingDraw {
        FadingDraw {
            c1: Vec::new(),
            c2: bs
                .iter()
                .zip(ris)
                .map(|(&b, r)| UserFading {
                    bs: Complex64::new(0.0, b),
                    ris: r.clone(),
                })
                .collect(),
            correlated: false,
        }
    }

    #[test]
    fn aligned_reflection() {
        let ris = vec![
            Complex64::new(0.3, -0.4),
            Complex64::new(-1.0, 0.2),
            Complex64::new(0.0, 0.7),
        ];
        let los = vec![Complex64::from_polar(2.0, 0.3); 3];
        let f = draw(&[0.5], std::slice::from_ref(&ris));
        let phases = full_surface_phases(&f, &los, 0, &PhaseModel::ideal(), &[]).unwrap();
        let g = reflected_gains(&f, &los, &phases)[0];
        let want = (0.5 + ris.iter().map(|c| 2.0 * c.norm()).sum::<f64>()).powi(2);
        assert!((g - want).abs() < 1e-12 * want);

        let zero = draw(
            &[0.5, 1.5],
            &[
                vec![Complex64::new(0.0, 0.0); 3],
                vec![Complex64::new(0.0, 0.0); 3],
            ],
        );
        let phases = full_surface_phases(&zero, &los, 1, &PhaseModel::ideal(), &[]).unwrap();
        assert_eq!(reflected_gains(&zero, &los, &phases), direct_gains(&zero));
    }

    #[test]
    fn samples_share_draws() {
        let mut cfg = SystemConfig::new(
            vec![Placement::new(150.0, 154.0)],
            vec![Placement::new(150.0, 146.0), Placement::new(100.0, 104.0)],
            16,
        )
        .unwrap();
        cfg.seed = 7;
        let sampler = SchemeSampler::new(&cfg, &Scheme::ALL).unwrap();
        assert_eq!(ris_noma_target(&cfg), 0);
        let a = sampler.sample(3).unwrap();
        let b = sampler.sample(3).unwrap();
        assert_eq!(a, b);
        let (SchemeSample::Tdma(t), SchemeSample::Noma(p)) = (&a[1], &a[3]) else {
            panic!()
        };
        assert_eq!(t, p);
        let SchemeSample::Tdma(rt) = &a[2] else {
            panic!()
        };
        assert_eq!(rt[0], t[0]);
        assert!(rt[1] > t[1] && rt[2] > t[2]);
        assert_eq!(
            BenchmarkConfig::new(Scheme::Proposed)
                .grid(&cfg)
                .unwrap()
                .points(),
            &[vec![1.0]]
        );
        assert_eq!(
            BenchmarkConfig::new(Scheme::Tdma).grid(&cfg).unwrap().len(),
            5151
        );
    }
}
