//! Outage probability of the C2 users: exact CLT-based closed form, high-SNR
//! limits, characteristic-function inversion and a Monte Carlo estimator.
//!
//! With `X = √L Σβ` approximated as `N(μ₁, s₁²)` and the scaled interference
//! `(2^γ − 1)|I_RIS + v|²` as exponential with mean `2 s₂²`, outage is
//! `P(X² − Ī < y)` with `y = (2^γ − 1)/ρ`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mc::{try_run_trials, CountAcc, BLOCKS_PER_WAVE};
use crate::partition::Partition;
use crate::phy::{c2_links, SubSurfaces, SystemConfig, TrialState};
use crate::quad::{integrate, QuadOptions};
use crate::special::{ln_marcum_q_half, marcum_q_half_complement};
use crate::sweep::Estimate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageParams {
    /// Target rate `γ*` in bits/s/Hz.
    pub target_rate: f64,
    /// Transmit SNR `ρ = P/σ²`, linear.
    pub transmit_snr: f64,
    pub n_total: usize,
    pub n_own: usize,
    /// Cascaded per-element RIS gain of the user.
    pub ris_gain: f64,
    /// Direct-link gain; zero when the BS term is cancelled.
    pub bs_gain: f64,
}

/// Gaussian-approximation moments of the outage event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageMoments {
    pub mu1: f64,
    pub s1_sq: f64,
    pub s2_sq: f64,
    pub y: f64,
}

impl OutageParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_rate >= 0.0 && self.target_rate.is_finite()) {
            return Err(Error::domain(format!(
                "target rate must be finite and >= 0, got {}",
                self.target_rate
            )));
        }
        if !(self.transmit_snr > 0.0) {
            return Err(Error::domain(format!(
                "transmit SNR must be positive, got {}",
                self.transmit_snr
            )));
        }
        if self.n_own == 0 {
            return Err(Error::domain("own sub-surface is empty, s1 = 0"));
        }
        if self.n_own > self.n_total {
            return Err(Error::domain(format!(
                "own sub-surface of {} exceeds the {} elements",
                self.n_own, self.n_total
            )));
        }
        if !(self.ris_gain > 0.0) || !(self.bs_gain >= 0.0) {
            return Err(Error::domain(
                "RIS gain must be positive and BS gain non-negative",
            ));
        }
        Ok(())
    }

    /// SINR threshold scaled by the noise, `(2^γ − 1)/ρ`.
    pub fn y(&self) -> f64 {
        (self.target_rate.exp2() - 1.0) / self.transmit_snr
    }

    pub fn moments(&self) -> Result<OutageMoments> {
        self.validate()?;
        let l = self.ris_gain;
        let nm = self.n_own as f64;
        let others = (self.n_total - self.n_own) as f64;
        Ok(OutageMoments {
            mu1: l.sqrt() * nm * PI.sqrt() / 2.0,
            s1_sq: l * nm * (4.0 - PI) / 4.0,
            s2_sq: 0.5 * (self.target_rate.exp2() - 1.0) * (l * others + self.bs_gain),
            y: self.y(),
        })
    }
}

/// `P(X² − E < y)` with `X ~ N(μ₁, s₁²)` and `E` exponential with mean
/// `2 s₂²`.
pub fn outage_from_moments(m: &OutageMoments) -> Result<f64> {
    let OutageMoments {
        mu1,
        s1_sq,
        s2_sq,
        y,
    } = *m;
    if !(s1_sq > 0.0) || !(s2_sq >= 0.0) || !(y >= 0.0) {
        return Err(Error::domain(format!("invalid outage moments {m:?}")));
    }
    let s1 = s1_sq.sqrt();
    let a = mu1 / s1;
    let term1 = marcum_q_half_complement(a, y.sqrt() / s1)?;
    if s2_sq == 0.0 {
        return Ok(term1.clamp(0.0, 1.0));
    }
    let total = s1_sq + s2_sq;
    let ratio = s2_sq / total;
    let a2 = a * ratio.sqrt();
    let b2 = (y * total / (s1_sq * s2_sq)).sqrt();
    let exponent = y / (2.0 * s2_sq) - mu1 * mu1 / (2.0 * total);
    let ln_term2 = 0.5 * ratio.ln() + exponent + ln_marcum_q_half(a2, b2)?;
    let p = term1 + ln_term2.exp();
    if !p.is_finite() {
        return Err(Error::Numerical {
            what: "closed-form outage",
            detail: format!("non-finite result for {m:?}"),
        });
    }
    if !(0.0..=1.0).contains(&p) {
        log::debug!("closed-form outage {p} clamped to [0, 1]");
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Closed-form outage probability under the CLT approximation.
pub fn outage_exact(params: &OutageParams) -> Result<f64> {
    outage_from_moments(&params.moments()?)
}

/// High-SNR limit `√(s₂²/(s₁²+s₂²)) · exp(−μ₁²/(2(s₁²+s₂²)))`.
pub fn outage_asymptotic(params: &OutageParams) -> Result<f64> {
    let m = params.moments()?;
    let total = m.s1_sq + m.s2_sq;
    if !(total > 0.0) {
        return Err(Error::domain("s1² + s2² must be positive"));
    }
    Ok((m.s2_sq / total).sqrt() * (-m.mu1 * m.mu1 / (2.0 * total)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformOutage {
    pub full: f64,
    /// Large-`M₂` approximation `exp(−π N_m / (4 M₂))`.
    pub simplified: f64,
}

/// High-SNR outage for a uniformly partitioned surface at `γ* = 1`, without
/// the BS term.
pub fn outage_uniform(m2: usize, n_m: usize) -> Result<UniformOutage> {
    if m2 == 0 || n_m == 0 {
        return Err(Error::domain("need at least one user and one element"));
    }
    let m = m2 as f64;
    let nm = n_m as f64;
    let d = 2.0 * m + 4.0 - PI;
    Ok(UniformOutage {
        full: (2.0 * m / d).sqrt() * (-PI * nm / (2.0 * d)).exp(),
        simplified: (-PI * nm / (4.0 * m)).exp(),
    })
}

/// Sub-surface size that brings the simplified uniform outage down to
/// `target`.
pub fn required_elements(m2: usize, target: f64) -> Result<usize> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::domain(format!(
            "target outage must be in (0, 1), got {target}"
        )));
    }
    if m2 == 0 {
        return Err(Error::domain("need at least one user"));
    }
    let n = (-(4.0 * m2 as f64 / PI) * target.ln()).ceil();
    if n < 1.0 {
        log::warn!("target outage {target} needs no elements; using 1");
        return Ok(1);
    }
    Ok(n as usize)
}

/// Moments of the signal amplitude and interference terms of
/// `Y = X² − |Z|²`, `X ~ N(mean_a, std_a²)`, `Z` complex with mean `mean_i`
/// and per-component variance `std_i²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianCfParams {
    pub mean_a: f64,
    pub std_a: f64,
    pub mean_i: f64,
    pub std_i: f64,
}

impl RicianCfParams {
    /// Parameters that make `Y` match the Rayleigh closed form.
    pub fn rayleigh_match(m: &OutageMoments) -> Self {
        Self {
            mean_a: m.mu1,
            std_a: m.s1_sq.sqrt(),
            mean_i: 0.0,
            std_i: m.s2_sq.sqrt(),
        }
    }

    fn scaled(&self, c: f64) -> Self {
        let r = c.sqrt();
        Self {
            mean_a: self.mean_a / r,
            std_a: self.std_a / r,
            mean_i: self.mean_i / r,
            std_i: self.std_i / r,
        }
    }
}

/// Characteristic function of `Y`.
pub fn rician_cf(p: &RicianCfParams, w: f64) -> Complex64 {
    let j = Complex64::i();
    let da = Complex64::new(1.0, -2.0 * w * p.std_a * p.std_a);
    let di = Complex64::new(1.0, 2.0 * w * p.std_i * p.std_i);
    let num = (j * w * p.mean_a * p.mean_a / da - j * w * p.mean_i * p.mean_i / di).exp();
    num / (da.sqrt() * di)
}

const GP_W_MIN: f64 = 1e-10;
const GP_PANEL_TOL: f64 = 1e-9;
const GP_MAX_DOUBLINGS: usize = 40;

/// `P(Y < y)` by Gil-Pelaez inversion of [`rician_cf`].
pub fn gil_pelaez_cdf(params: &RicianCfParams, y: f64) -> Result<f64> {
    let c = params.std_a * params.std_a + params.std_i * params.std_i;
    if !(c > 0.0) {
        return Err(Error::domain(
            "Gil-Pelaez inversion needs std_a > 0 or std_i > 0",
        ));
    }
    let p = params.scaled(c);
    let yn = y / c;
    let f = |w: f64| {
        let z = Complex64::from_polar(1.0, -w * yn) * rician_cf(&p, w);
        z.im / w
    };
    let opts = QuadOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-10,
        max_segments: 50_000,
    };
    let mut total = integrate(f, GP_W_MIN, 1.0, opts)?;
    let mut lo = 1.0;
    let mut quiet = 0;
    let mut doublings = 0;
    while quiet < 2 {
        if doublings == GP_MAX_DOUBLINGS {
            return Err(Error::Numerical {
                what: "Gil-Pelaez inversion",
                detail: format!(
                    "integral not converged at w = {lo} after {GP_MAX_DOUBLINGS} doublings (y = {y}, partial {total})"
                ),
            });
        }
        let panel = integrate(f, lo, 2.0 * lo, opts)?;
        total += panel;
        quiet = if panel.abs() < GP_PANEL_TOL {
            quiet + 1
        } else {
            0
        };
        lo *= 2.0;
        doublings += 1;
    }
    let cdf = 0.5 - total / PI;
    if !(0.0..=1.0).contains(&cdf) {
        log::debug!("Gil-Pelaez CDF {cdf} clamped to [0, 1]");
    }
    Ok(cdf.clamp(0.0, 1.0))
}

/// Empirical outage of every C2 user at transmit power `power` (watts):
/// the fraction of trials with rate below `target_rate`, with its Wilson
/// half-width.
pub fn outage_monte_carlo(
    cfg: &SystemConfig,
    partition: &Partition,
    power: f64,
    target_rate: f64,
    trials: u64,
) -> Result<Vec<Estimate>> {
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    partition.check(cfg.n, cfg.m2())?;
    let model = cfg.channel_model()?;
    let subs = SubSurfaces::new(partition);
    let rho = power / cfg.noise_power;
    let counts = try_run_trials(
        trials,
        BLOCKS_PER_WAVE,
        || vec![CountAcc::default(); cfg.m2()],
        |t, acc| {
            let state = TrialState::for_trial(cfg, t)?;
            let fading = model.realize(&state.white, cfg.correlated);
            for (a, l) in acc
                .iter_mut()
                .zip(c2_links(cfg, &model, &fading, &state, &subs)?)
            {
                a.push((1.0 + l.sinr(rho)).log2() < target_rate);
            }
            Ok(())
        },
    )?;
    Ok(counts
        .iter()
        .map(|c| Estimate {
            value: c.proportion(),
            half_width: c.wilson().half_width,
        })
        .collect())
}

/// Closed-form parameters of C2 user `m` under `partition`.
pub fn user_outage_params(
    cfg: &SystemConfig,
    partition: &Partition,
    m: usize,
    power: f64,
    target_rate: f64,
) -> Result<OutageParams> {
    let budgets = cfg.budgets(&cfg.c2)?;
    let b = budgets
        .get(m)
        .ok_or_else(|| Error::usage(format!("C2 user {m} does not exist")))?;
    Ok(OutageParams {
        target_rate,
        transmit_snr: power / cfg.noise_power,
        n_total: cfg.n,
        n_own: partition.sizes()[m],
        ris_gain: b.ris_total_gain(),
        bs_gain: if cfg.m1() > 0 { b.bs_user_gain() } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(snr: f64) -> OutageParams {
        OutageParams {
            target_rate: 0.75,
            transmit_snr: snr,
            n_total: 64,
            n_own: 32,
            ris_gain: 2e-12,
            bs_gain: 1e-12,
        }
    }

    #[test]
    fn high_snr_limit() {
        let p = params(1e30);
        let e = outage_exact(&p).unwrap();
        let a = outage_asymptotic(&p).unwrap();
        assert!((e - a).abs() < 1e-12);
    }

    #[test]
    fn no_interference_reduces_to_first_term() {
        let p = OutageParams {
            n_own: 64,
            bs_gain: 0.0,
            ..params(1e11)
        };
        let m = p.moments().unwrap();
        let s1 = m.s1_sq.sqrt();
        let want = marcum_q_half_complement(m.mu1 / s1, (m.y / m.s1_sq).sqrt()).unwrap();
        assert_eq!(outage_exact(&p).unwrap(), want);
        assert_eq!(outage_asymptotic(&p).unwrap(), 0.0);
    }

    #[test]
    fn monotone_in_snr() {
        let mut prev = 1.0;
        for k in 0..60 {
            let v = outage_exact(&params(10f64.powf(8.0 + 0.1 * k as f64))).unwrap();
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn errors() {
        assert!(outage_exact(&OutageParams {
            n_own: 0,
            ..params(1.0)
        })
        .is_err());
        assert!(outage_exact(&OutageParams {
            n_own: 65,
            ..params(1.0)
        })
        .is_err());
        assert!(required_elements(4, 1.0).is_err());
        assert!(required_elements(4, 0.0).is_err());
    }

    #[test]
    fn uniform_values() {
        let u = outage_uniform(16, 32).unwrap();
        // Hand evaluation: d = 32 + 4 − π.
        let d = 36.0 - PI;
        assert!((u.full - (32.0 / d).sqrt() * (-PI * 32.0 / (2.0 * d)).exp()).abs() < 1e-15);
        assert!((u.full - 0.213_739_77).abs() < 1e-8);
        assert!((u.simplified - 0.207_879_58).abs() < 1e-8);
        assert!((u.full - u.simplified).abs() / u.full < 0.1);
        let far = outage_uniform(4, 10_000).unwrap();
        assert!(far.full < 1e-300 && far.simplified < 1e-300);
    }

    #[test]
    fn required_elements_values() {
        assert_eq!(required_elements(4, 0.01).unwrap(), 24);
        assert_eq!(required_elements(4, 1.0 - 1e-12).unwrap(), 1);
    }

    #[test]
    fn cf_properties() {
        let p = RicianCfParams {
            mean_a: 1.3,
            std_a: 0.4,
            mean_i: 0.2,
            std_i: 0.7,
        };
        assert_eq!(rician_cf(&p, 0.0), Complex64::new(1.0, 0.0));
        for k in 1..50 {
            let w = 0.37 * k as f64;
            let d = rician_cf(&p, -w) - rician_cf(&p, w).conj();
            assert!(d.norm() < 1e-14);
        }
        // Central chi-square with one degree of freedom, scaled by σ².
        let p = RicianCfParams {
            mean_a: 0.0,
            std_a: 0.8,
            mean_i: 0.0,
            std_i: 0.0,
        };
        let w = 1.7;
        let want = Complex64::new(1.0, -2.0 * w * 0.64).powf(-0.5);
        assert!((rician_cf(&p, w) - want).norm() < 1e-14);
    }

    #[test]
    fn gil_pelaez_matches_closed_form() {
        let p = params(3e11);
        let m = p.moments().unwrap();
        let cf = RicianCfParams::rayleigh_match(&m);
        let gp = gil_pelaez_cdf(&cf, m.y).unwrap();
        let exact = outage_exact(&p).unwrap();
        assert!((gp - exact).abs() < 1e-6, "{gp} vs {exact}");
        assert!(gil_pelaez_cdf(&cf, -1e3 * m.s1_sq).unwrap() < 1e-6);
        assert!(gil_pelaez_cdf(&cf, 1e3 * m.s1_sq).unwrap() > 1.0 - 1e-6);
    }
}
