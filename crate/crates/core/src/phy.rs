//! Transmit signal construction, sub-surface phase adjustment and
//! per-realization SINRs for both clusters.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{
    far_field_distance, wavelength, ChannelModel, FadingDraw, LinkBudget, PathLossModel,
    PhaseIndexing, RisGeometry, WhiteDraw,
};
use crate::error::{Error, Result};
use crate::mc::{trial_rng, try_run_trials, MeanAcc, Stream, BLOCKS_PER_WAVE};
use crate::partition::Partition;
use crate::sweep::Estimate;

/// Distances of one user to the BS and to the RIS centre, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub bs_distance: f64,
    pub ris_distance: f64,
}

impl Placement {
    pub const fn new(bs_distance: f64, ris_distance: f64) -> Self {
        Self {
            bs_distance,
            ris_distance,
        }
    }
}

/// Hardware model of the reflection phases.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseModel {
    /// Number of quantization levels `Z`; `None` is continuous.
    pub levels: Option<u32>,
    /// Von Mises concentration of the per-element phase error; `None` is
    /// error free.
    pub kappa: Option<f64>,
}

impl PhaseModel {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn quantize(&self, phase: f64) -> f64 {
        match self.levels {
            Some(z) => quantize_phase(phase, z),
            None => phase,
        }
    }
}

/// Rounds `phase` to the nearest of `{0, 2π/z, …, 2π(z−1)/z}`.
pub fn quantize_phase(phase: f64, z: u32) -> f64 {
    let step = TAU / z as f64;
    let k = (phase.rem_euclid(TAU) / step).round() as u64 % z as u64;
    k as f64 * step
}

/// Von Mises distribution on `(−π, π]` with zero mean, sampled with the
/// Best–Fisher rejection scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonMises {
    kappa: f64,
    r: f64,
}

impl VonMises {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || kappa.is_infinite() {
            return Err(Error::domain(format!(
                "von Mises concentration must be finite and >= 0, got {kappa}"
            )));
        }
        let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
        let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
        Ok(Self {
            kappa,
            r: (1.0 + rho * rho) / (2.0 * rho),
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

impl Distribution<f64> for VonMises {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.kappa < 1e-8 {
            return PI * (2.0 * rng.random::<f64>() - 1.0);
        }
        if self.kappa > 1e6 {
            let z: f64 = rng.sample(StandardNormal);
            return (z / self.kappa.sqrt() + PI).rem_euclid(TAU) - PI;
        }
        loop {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let u3: f64 = rng.random();
            let z = (PI * u1).cos();
            let f = (1.0 + self.r * z) / (self.r + z);
            let c = self.kappa * (self.r - f);
            if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
                let theta = f.clamp(-1.0, 1.0).acos();
                return if u3 > 0.5 { theta } else { -theta };
            }
        }
    }
}

/// Superposition-coded BS signal `Σ √(P ζ_m) x_m`.
pub fn superpose(symbols: &[Complex64], allocations: &[f64], power: f64) -> Result<Complex64> {
    if symbols.len() != allocations.len() {
        return Err(Error::usage(format!(
            "{} symbols but {} power allocations",
            symbols.len(),
            allocations.len()
        )));
    }
    Ok(symbols
        .iter()
        .zip(allocations)
        .map(|(x, z)| x * (power * z).sqrt())
        .sum())
}

/// Unit-modulus PSK symbol `e^{j 2π k / order}`.
pub fn psk_phase<R: Rng + ?Sized>(order: u32, rng: &mut R) -> f64 {
    TAU * rng.random_range(0..order) as f64 / order as f64
}

/// Draws the C1 symbols. With two users the paired constellation
/// `±(1+j)/√2`, `±(1−j)/√2` is used so that any allocation keeps the
/// superposed symbol on the unit circle; otherwise QPSK.
pub fn c1_symbols<R: Rng + ?Sized>(m1: usize, rng: &mut R) -> Vec<Complex64> {
    let sign = |rng: &mut R| if rng.random::<bool>() { 1.0 } else { -1.0 };
    if m1 == 2 {
        let a = sign(rng);
        let b = sign(rng);
        return vec![
            Complex64::new(a, a) * FRAC_1_SQRT_2,
            Complex64::new(b, -b) * FRAC_1_SQRT_2,
        ];
    }
    (0..m1)
        .map(|_| Complex64::from_polar(1.0, PI / 4.0 + psk_phase(4, rng)))
        .collect()
}

/// Unit-power superposed symbol `s = x / √P` on the unit circle. Without C1
/// users the BS sends the fixed symbol 1.
pub fn unit_symbol(symbols: &[Complex64], allocations: &[f64]) -> Result<Complex64> {
    if symbols.is_empty() {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let x = superpose(symbols, allocations, 1.0)?;
    let norm = x.norm();
    Ok(if norm > 0.0 {
        x / norm
    } else {
        Complex64::new(1.0, 0.0)
    })
}

/// Configuration of one simulated system, excluding the transmit power.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Noise power in watts.
    pub noise_power: f64,
    pub carrier_hz: f64,
    pub path_loss: PathLossModel,
    /// Users behind the RIS (served by the BS only).
    pub c1: Vec<Placement>,
    /// Users in front of the RIS (served by sub-surfaces).
    pub c2: Vec<Placement>,
    pub n: usize,
    /// `(n_h, n_v)`; `None` picks the most-square layout.
    pub layout: Option<(usize, usize)>,
    /// Element spacing in wavelengths along both axes.
    pub spacing: f64,
    pub indexing: PhaseIndexing,
    /// `(elevation, azimuth)` of the BS seen from the RIS; `None` draws them
    /// once from the seed.
    pub angles: Option<(f64, f64)>,
    /// BS–RIS distance in metres; `None` uses the far-field minimum.
    pub bs_ris_distance: Option<f64>,
    pub correlated: bool,
    pub phase: PhaseModel,
    pub psk_order: u32,
    /// Sub-surface sizes, one per C2 user in listing order.
    pub partition: Partition,
    /// Fixed C1 power allocation; `None` searches for the fairest one.
    pub power_allocation: Option<Vec<f64>>,
    pub seed: u64,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl SystemConfig {
    /// Defaults: −90 dBm noise, 1.8 GHz, λ/2 spacing, i.i.d. channels,
    /// ideal phases, QPSK, uniform partition.
    pub fn new(c1: Vec<Placement>, c2: Vec<Placement>, n: usize) -> Result<Self> {
        let partition = Partition::uniform(n, c2.len())?;
        let cfg = Self {
            noise_power: dbm_to_watts(-90.0),
            carrier_hz: 1.8e9,
            path_loss: PathLossModel::default(),
            c1,
            c2,
            n,
            layout: None,
            spacing: 0.5,
            indexing: PhaseIndexing::RowMajor,
            angles: None,
            bs_ris_distance: None,
            correlated: false,
            phase: PhaseModel::ideal(),
            psk_order: 4,
            partition,
            power_allocation: None,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn m1(&self) -> usize {
        self.c1.len()
    }

    pub fn m2(&self) -> usize {
        self.c2.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.c2.is_empty() {
            return Err(Error::config(
                "at least one user in front of the RIS is required",
            ));
        }
        if self.n == 0 {
            return Err(Error::config("RIS must have at least one element"));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::config(format!(
                "noise power must be positive, got {}",
                self.noise_power
            )));
        }
        if self.psk_order == 0 {
            return Err(Error::config("PSK order must be at least 1"));
        }
        if self.phase.levels == Some(0) {
            return Err(Error::config("phase levels must be at least 1"));
        }
        if let Some(k) = self.phase.kappa {
            if !(k >= 0.0) || k.is_infinite() {
                return Err(Error::config(format!(
                    "von Mises concentration must be finite and >= 0, got {k}"
                )));
            }
        }
        if !(self.spacing > 0.0) {
            return Err(Error::config(format!(
                "element spacing must be positive, got {}",
                self.spacing
            )));
        }
        if let Some((h, v)) = self.layout {
            if h * v != self.n {
                return Err(Error::config(format!(
                    "layout {h} x {v} does not hold {} elements",
                    self.n
                )));
            }
        }
        for (i, p) in self.c1.iter().chain(&self.c2).enumerate() {
            if !(p.bs_distance > 0.0 && p.ris_distance > 0.0) {
                return Err(Error::config(format!(
                    "user {} has a non-positive distance",
                    i + 1
                )));
            }
        }
        self.partition.check(self.n, self.m2())?;
        if let Some(z) = &self.power_allocation {
            if z.len() != self.m1() {
                return Err(Error::config(format!(
                    "{} power allocations for {} C1 users",
                    z.len(),
                    self.m1()
                )));
            }
            if z.iter().any(|&v| !(v >= 0.0)) || (z.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::config(
                    "power allocations must be non-negative and sum to 1",
                ));
            }
        }
        Ok(())
    }

    pub fn wavelength(&self) -> Result<f64> {
        wavelength(self.carrier_hz)
    }

    pub fn bs_ris_distance(&self) -> Result<f64> {
        Ok(match self.bs_ris_distance {
            Some(d) => d,
            None => far_field_distance(self.n, self.wavelength()?),
        })
    }

    /// Angles of arrival, drawn once per seed when not configured.
    pub fn angles(&self) -> (f64, f64) {
        self.angles.unwrap_or_else(|| {
            let mut rng = trial_rng(self.seed, Stream::Geometry, 0);
            let elevation = rng.random_range(0.0..PI / 2.0);
            let azimuth = rng.random_range(-PI / 2.0..PI / 2.0);
            (elevation, azimuth)
        })
    }

    pub fn geometry(&self) -> Result<RisGeometry> {
        let lambda = self.wavelength()?;
        let geometry = match self.layout {
            Some((h, v)) => {
                let d = self.spacing * lambda;
                RisGeometry::new(h, v, d, d, lambda)?
            }
            None => RisGeometry::planar(self.n, lambda, self.spacing)?,
        };
        let (el, az) = self.angles();
        Ok(geometry.with_angles(el, az).with_indexing(self.indexing))
    }

    pub fn budgets(&self, users: &[Placement]) -> Result<Vec<LinkBudget>> {
        let lambda = self.wavelength()?;
        let r_s = self.bs_ris_distance()?;
        users
            .iter()
            .map(|p| {
                LinkBudget::from_distances(
                    &self.path_loss,
                    lambda,
                    p.bs_distance,
                    r_s,
                    p.ris_distance,
                )
            })
            .collect()
    }

    pub fn channel_model(&self) -> Result<ChannelModel> {
        ChannelModel::new(
            self.geometry()?,
            self.budgets(&self.c1)?,
            self.budgets(&self.c2)?,
        )
    }

    /// C1 allocation used to build the transmitted symbol when no fixed
    /// allocation is configured.
    pub fn symbol_allocation(&self) -> Vec<f64> {
        match &self.power_allocation {
            Some(z) => z.clone(),
            None => vec![1.0 / self.m1().max(1) as f64; self.m1()],
        }
    }
}

/// Element ranges of the sub-surfaces, indexed by C2 user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubSurfaces {
    ranges: Vec<Range<usize>>,
    owner: Vec<usize>,
}

impl SubSurfaces {
    /// Lays the sub-surfaces out contiguously in user order.
    pub fn new(partition: &Partition) -> Self {
        let mut ranges = Vec::with_capacity(partition.len());
        let mut owner = Vec::with_capacity(partition.total());
        let mut start = 0;
        for (user, &size) in partition.sizes().iter().enumerate() {
            ranges.push(start..start + size);
            owner.extend(std::iter::repeat_n(user, size));
            start += size;
        }
        Self { ranges, owner }
    }

    pub fn range(&self, user: usize) -> Range<usize> {
        self.ranges[user].clone()
    }

    pub fn owner(&self, element: usize) -> usize {
        self.owner[element]
    }

    pub fn n(&self) -> usize {
        self.owner.len()
    }
}

/// Random quantities of one coherence block that are shared by every scheme
/// and every candidate partition.
#[derive(Debug, Clone)]
pub struct TrialState {
    pub white: WhiteDraw,
    /// PSK phase `θ_m` of every C2 user.
    pub psk: Vec<f64>,
    /// Unit-power superposed BS symbol.
    pub symbol: Complex64,
    /// Per-element phase error; empty when phases are error free.
    pub phase_errors: Vec<f64>,
}

impl TrialState {
    pub fn sample<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<Self> {
        let white = WhiteDraw::sample(cfg.m1(), cfg.m2(), cfg.n, rng);
        let psk = (0..cfg.m2())
            .map(|_| psk_phase(cfg.psk_order, rng))
            .collect();
        let symbols = c1_symbols(cfg.m1(), rng);
        let symbol = unit_symbol(&symbols, &cfg.symbol_allocation())?;
        let phase_errors = match cfg.phase.kappa {
            Some(k) => {
                let vm = VonMises::new(k)?;
                (0..cfg.n).map(|_| vm.sample(rng)).collect()
            }
            None => Vec::new(),
        };
        Ok(Self {
            white,
            psk,
            symbol,
            phase_errors,
        })
    }

    /// State of trial `trial` of the configured seed.
    pub fn for_trial(cfg: &SystemConfig, trial: u64) -> Result<Self> {
        Self::sample(cfg, &mut trial_rng(cfg.seed, Stream::Channel, trial))
    }

    pub fn error(&self, element: usize) -> f64 {
        self.phase_errors.get(element).copied().unwrap_or(0.0)
    }
}

/// Reflection phases of one sub-surface, aligned to its own user:
/// `Φ = θ_m − arg g_m − arg h − arg s`, then quantized, then perturbed.
pub fn phase_adjust(
    sub_surface: Range<usize>,
    own_channel: &[Complex64],
    los: &[Complex64],
    theta_m: f64,
    symbol: Complex64,
    model: &PhaseModel,
    errors: &[f64],
) -> Result<Vec<f64>> {
    if sub_surface.end > own_channel.len() || sub_surface.end > los.len() {
        return Err(Error::usage(format!(
            "sub-surface {sub_surface:?} exceeds the {} RIS elements",
            own_channel.len().min(los.len())
        )));
    }
    let theta_s = symbol.arg();
    Ok(sub_surface
        .map(|n| {
            let ideal = theta_m - own_channel[n].arg() - los[n].arg() - theta_s;
            model.quantize(ideal) + errors.get(n).copied().unwrap_or(0.0)
        })
        .collect())
}

/// Applied phase of every element for a given partition.
pub fn surface_phases(
    fading: &FadingDraw,
    los: &[Complex64],
    subs: &SubSurfaces,
    state: &TrialState,
    model: &PhaseModel,
) -> Result<Vec<f64>> {
    let mut phases = Vec::with_capacity(subs.n());
    for (m, user) in fading.c2.iter().enumerate() {
        phases.extend(phase_adjust(
            subs.range(m),
            &user.ris,
            los,
            state.psk[m],
            state.symbol,
            model,
            &state.phase_errors,
        )?);
    }
    Ok(phases)
}

/// Power-independent part of a C2 user's link in one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C2Link {
    /// Signal power `A_m`.
    pub signal: f64,
    /// Total interference power `I_m`.
    pub interference: f64,
    /// Interference reflected by the other sub-surfaces.
    pub ris_interference: Complex64,
}

impl C2Link {
    pub fn sinr(&self, rho: f64) -> f64 {
        self.signal / (self.interference + 1.0 / rho)
    }

    pub fn metrics(&self, rho: f64) -> RealizationMetrics {
        let sinr = self.sinr(rho);
        RealizationMetrics {
            signal: self.signal,
            interference: self.interference,
            ris_interference: self.ris_interference,
            sinr,
            rate: (1.0 + sinr).log2(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationMetrics {
    pub signal: f64,
    pub interference: f64,
    pub ris_interference: Complex64,
    pub sinr: f64,
    pub rate: f64,
}

/// Signal and interference seen by C2 user `m`. The BS term `v_m s` is
/// included only when `bs_interference` is set; without C1 users the BS
/// sends a known symbol that the receiver removes.
pub fn receive_c2(
    m: usize,
    fading: &FadingDraw,
    los: &[Complex64],
    phases: &[f64],
    subs: &SubSurfaces,
    symbol: Complex64,
    bs_interference: bool,
) -> Result<C2Link> {
    let user = fading
        .c2
        .get(m)
        .ok_or_else(|| Error::usage(format!("C2 user {m} does not exist")))?;
    if phases.len() != user.ris.len() || subs.n() != user.ris.len() {
        return Err(Error::usage(format!(
            "partition covers {} elements, phases {}, channel {}",
            subs.n(),
            phases.len(),
            user.ris.len()
        )));
    }
    let own = subs.range(m);
    let mut signal = Complex64::new(0.0, 0.0);
    let mut other = Complex64::new(0.0, 0.0);
    for (n, ((g, h), &phi)) in user.ris.iter().zip(los).zip(phases).enumerate() {
        let term = g * h * Complex64::from_polar(1.0, phi);
        if own.contains(&n) {
            signal += term;
        } else {
            other += term;
        }
    }
    let ris_interference = other * symbol;
    let bs = if bs_interference {
        user.bs * symbol
    } else {
        Complex64::new(0.0, 0.0)
    };
    Ok(C2Link {
        signal: (signal * symbol).norm_sqr(),
        interference: (ris_interference + bs).norm_sqr(),
        ris_interference,
    })
}

/// All C2 links of one realization under `partition`.
pub fn c2_links(
    cfg: &SystemConfig,
    model: &ChannelModel,
    fading: &FadingDraw,
    state: &TrialState,
    subs: &SubSurfaces,
) -> Result<Vec<C2Link>> {
    let phases = surface_phases(fading, &model.los, subs, state, &cfg.phase)?;
    (0..cfg.m2())
        .map(|m| {
            receive_c2(
                m,
                fading,
                &model.los,
                &phases,
                subs,
                state.symbol,
                cfg.m1() > 0,
            )
        })
        .collect()
}

/// SIC decoding order: ascending channel gain, ties by index.
pub fn sic_order(gains: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[a].total_cmp(&gains[b]).then(a.cmp(&b)));
    order
}

/// Downlink power-domain NOMA SINRs. User `k` removes the signals of every
/// weaker user and treats the stronger users' allocations as noise.
pub fn sic_sinrs(gains: &[f64], allocations: &[f64], rho: f64, out: &mut [f64]) {
    let order = sic_order(gains);
    let mut stronger = 0.0;
    for &k in order.iter().rev() {
        let g = rho * gains[k];
        out[k] = g * allocations[k] / (g * stronger + 1.0);
        stronger += allocations[k];
    }
}

/// SINRs of the C1 users, which see no C2 signal.
pub fn receive_c1(fading: &FadingDraw, allocations: &[f64], rho: f64) -> Result<Vec<f64>> {
    if allocations.len() != fading.c1.len() {
        return Err(Error::usage(format!(
            "{} allocations for {} C1 users",
            allocations.len(),
            fading.c1.len()
        )));
    }
    let gains: Vec<f64> = fading.c1.iter().map(|u| u.bs.norm_sqr()).collect();
    let mut out = vec![0.0; gains.len()];
    sic_sinrs(&gains, allocations, rho, &mut out);
    Ok(out)
}

pub fn sum_rate(rates: &[f64]) -> f64 {
    rates.iter().sum()
}

/// Ergodic rate of every user at transmit power `power` (watts), C1 users
/// first with the configured or uniform allocation, then C2 users.
pub fn ergodic_rate(
    cfg: &SystemConfig,
    partition: &Partition,
    power: f64,
    trials: u64,
) -> Result<Vec<Estimate>> {
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::domain(format!(
            "transmit power must be positive, got {power}"
        )));
    }
    partition.check(cfg.n, cfg.m2())?;
    let model = cfg.channel_model()?;
    let subs = SubSurfaces::new(partition);
    let rho = power / cfg.noise_power;
    let zeta = cfg.symbol_allocation();
    let accs = try_run_trials(
        trials,
        BLOCKS_PER_WAVE,
        || vec![MeanAcc::default(); cfg.m1() + cfg.m2()],
        |t, acc| {
            let state = TrialState::for_trial(cfg, t)?;
            let fading = model.realize(&state.white, cfg.correlated);
            let c1 = receive_c1(&fading, &zeta, rho)?.into_iter();
            let c2 = c2_links(cfg, &model, &fading, &state, &subs)?
                .into_iter()
                .map(|l| l.sinr(rho));
            for (a, s) in acc.iter_mut().zip(c1.chain(c2)) {
                a.push((1.0 + s).log2());
            }
            Ok(())
        },
    )?;
    Ok(accs.iter().map(Estimate::from).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::UserFading;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn row1(n: usize) -> SystemConfig {
        SystemConfig::new(
            vec![],
            vec![Placement::new(150.0, 146.0), Placement::new(100.0, 104.0)],
            n,
        )
        .unwrap()
    }

    #[test]
    fn paired_constellation_has_unit_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = c1_symbols(2, &mut rng);
            let z1: f64 = rng.random();
            let s = superpose(&x, &[z1, 1.0 - z1], 1.0).unwrap();
            assert!((s.norm() - 1.0).abs() < 1e-14);
        }
        let x = Complex64::new(0.3, -0.4);
        let p = 2.5;
        assert_eq!(superpose(&[x], &[1.0], p).unwrap(), x * p.sqrt());
        let s = superpose(&[x, x], &[0.5, 0.5], p).unwrap();
        assert!((s - x * (2.0 * p).sqrt()).norm() < 1e-14);
        assert!(superpose(&[x], &[0.5, 0.5], p).is_err());
    }

    #[test]
    fn quantized_phases_are_on_grid() {
        for i in 0..1000 {
            let phi = -20.0 + 0.04 * i as f64;
            let q = quantize_phase(phi, 8);
            let k = q / (PI / 4.0);
            assert!((k - k.round()).abs() < 1e-12 && (0.0..TAU).contains(&q));
            let err = (phi - q).rem_euclid(TAU);
            assert!(err.min(TAU - err) <= PI / 8.0 + 1e-12);
        }
    }

    #[test]
    fn von_mises_circular_mean() {
        // E[cos θ] = I1(κ)/I0(κ), from the power series of the Bessel functions.
        fn bessel_i(nu: i32, x: f64) -> f64 {
            let mut term = (x / 2.0).powi(nu) / (1..=nu).map(f64::from).product::<f64>();
            let mut sum = term;
            for k in 1..60 {
                term *= (x / 2.0).powi(2) / (k as f64 * (k + nu) as f64);
                sum += term;
            }
            sum
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kappa in [0.5, 2.0, 20.0] {
            let vm = VonMises::new(kappa).unwrap();
            let n = 200_000;
            let mean = (0..n).map(|_| vm.sample(&mut rng).cos()).sum::<f64>() / n as f64;
            let want = bessel_i(1, kappa) / bessel_i(0, kappa);
            assert!(
                (mean - want).abs() < 5e-3,
                "kappa {kappa}: {mean} vs {want}"
            );
        }
        assert!(VonMises::new(-1.0).is_err());
    }

    #[test]
    fn ideal_phases_make_own_terms_real() {
        let cfg = row1(40);
        let model = cfg.channel_model().unwrap();
        let state = TrialState::for_trial(&cfg, 0).unwrap();
        let fading = model.realize(&state.white, false);
        let subs = SubSurfaces::new(&cfg.partition);
        let phases = surface_phases(&fading, &model.los, &subs, &state, &cfg.phase).unwrap();
        for m in 0..2 {
            let r = subs.range(m);
            for n in r {
                let t = fading.c2[m].ris[n]
                    * model.los[n]
                    * Complex64::from_polar(1.0, phases[n])
                    * state.symbol
                    * Complex64::from_polar(1.0, -state.psk[m]);
                assert!(t.im.abs() < 1e-12 * t.norm() && t.re > 0.0);
            }
        }
    }

    #[test]
    fn unit_beta_gives_coherent_sum() {
        let cfg = row1(40);
        let model = cfg.channel_model().unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); 40];
        let user = UserFading {
            bs: Complex64::new(0.0, 0.0),
            ris: ones.clone(),
        };
        let fading = FadingDraw {
            c1: vec![],
            c2: vec![user.clone(), user],
            correlated: false,
        };
        let mut state = TrialState::for_trial(&cfg, 0).unwrap();
        state.symbol = Complex64::new(1.0, 0.0);
        let subs = SubSurfaces::new(&cfg.partition);
        let phases = surface_phases(&fading, &model.los, &subs, &state, &cfg.phase).unwrap();
        let link = receive_c2(0, &fading, &model.los, &phases, &subs, state.symbol, false).unwrap();
        let l = model.c2[0].bs_ris_gain();
        assert!((link.signal / (l * 400.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_user_has_no_ris_interference() {
        let mut cfg = SystemConfig::new(vec![], vec![Placement::new(100.0, 104.0)], 40).unwrap();
        cfg.seed = 5;
        let model = cfg.channel_model().unwrap();
        let state = TrialState::for_trial(&cfg, 0).unwrap();
        let fading = model.realize(&state.white, false);
        let subs = SubSurfaces::new(&cfg.partition);
        let link = c2_links(&cfg, &model, &fading, &state, &subs).unwrap()[0];
        assert_eq!(link.interference, 0.0);
        let beta: f64 = fading.c2[0].ris.iter().map(|g| g.norm()).sum();
        let want = model.c2[0].bs_ris_gain() * beta * beta;
        assert!((link.signal / want - 1.0).abs() < 1e-12);
        let rho = 1e12;
        assert!((link.sinr(rho) / (rho * want) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_user_sic_oracle() {
        let gains = [0.3, 2.0];
        let zeta = [0.8, 0.2];
        let rho = 10.0;
        let mut out = [0.0; 2];
        sic_sinrs(&gains, &zeta, rho, &mut out);
        let weak = rho * 0.8 * 0.3 / (rho * 0.2 * 0.3 + 1.0);
        let strong = rho * 0.2 * 2.0;
        assert!((out[0] - weak).abs() < 1e-14);
        assert!((out[1] - strong).abs() < 1e-14);
        sic_sinrs(&gains, &[1.0, 0.0], rho, &mut out);
        assert_eq!(out[1], 0.0);
        assert!((out[0] - rho * 0.3).abs() < 1e-14);
        assert_eq!(sic_order(&[1.0, 1.0, 0.5]), vec![2, 0, 1]);
    }

    #[test]
    fn sum_rate_adds() {
        assert_eq!(sum_rate(&[]), 0.0);
        assert_eq!(sum_rate(&[1.5]), 1.5);
        assert_eq!(sum_rate(&[1.0, 2.0]), 3.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = row1(40);
        cfg.power_allocation = Some(vec![0.5]);
        assert!(cfg.validate().is_err());
        let mut cfg = row1(40);
        cfg.layout = Some((7, 7));
        assert!(cfg.validate().is_err());
        assert!(SystemConfig::new(vec![], vec![], 40).is_err());
    }
}
