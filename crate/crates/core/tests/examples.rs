//! Monte Carlo operation examples that are too slow for unit tests.

use std::f64::consts::PI;

use risnoma_core::baselines::{Scheme, SchemeSample, SchemeSampler};
use risnoma_core::outage::{outage_monte_carlo, outage_uniform};
use risnoma_core::phy::{c2_links, dbm_to_watts, ergodic_rate, SubSurfaces, TrialState};
use risnoma_core::{Partition, Placement, SystemConfig};

fn single_user(n: usize) -> SystemConfig {
    let mut cfg = SystemConfig::new(vec![], vec![Placement::new(100.0, 104.0)], n).unwrap();
    cfg.bs_ris_distance = Some(7.0);
    cfg
}

fn two_users(n: usize) -> SystemConfig {
    SystemConfig::new(
        vec![],
        vec![Placement::new(150.0, 146.0), Placement::new(100.0, 104.0)],
        n,
    )
    .unwrap()
}

#[test]
fn rates_vanish_at_low_power() {
    let cfg = two_users(40);
    let r = ergodic_rate(&cfg, &cfg.partition, 1e-25, 2_000).unwrap();
    assert!(r.iter().all(|e| e.value < 1e-6), "{r:?}");
}

#[test]
fn doubling_the_surface_adds_two_bits() {
    let p = dbm_to_watts(40.0);
    let small = single_user(40);
    let large = single_user(80);
    let a = ergodic_rate(&small, &small.partition, p, 20_000).unwrap()[0].value;
    let b = ergodic_rate(&large, &large.partition, p, 20_000).unwrap()[0].value;
    assert!((b - a - 2.0).abs() < 0.05, "{a} -> {b}");
}

#[test]
fn estimates_agree_across_trial_counts() {
    let cfg = two_users(40);
    let p = dbm_to_watts(20.0);
    let short = ergodic_rate(&cfg, &cfg.partition, p, 10_000).unwrap();
    let long = ergodic_rate(&cfg, &cfg.partition, p, 100_000).unwrap();
    for (s, l) in short.iter().zip(&long) {
        assert!(
            (s.value - l.value).abs() <= s.half_width + l.half_width,
            "{s:?} vs {l:?}"
        );
    }
}

#[test]
fn single_user_sees_no_interference() {
    let cfg = single_user(36);
    let model = cfg.channel_model().unwrap();
    let subs = SubSurfaces::new(&cfg.partition);
    for t in 0..20 {
        let state = TrialState::for_trial(&cfg, t).unwrap();
        let fading = model.realize(&state.white, false);
        let link = c2_links(&cfg, &model, &fading, &state, &subs).unwrap()[0];
        let coherent: f64 = fading.c2[0]
            .ris
            .iter()
            .zip(&model.los)
            .map(|(g, h)| g.norm() * h.norm())
            .sum();
        assert_eq!(link.interference, 0.0);
        assert!((link.signal - coherent * coherent).abs() <= 1e-12 * link.signal);
    }
}

// E(Σβ)² = Var + mean² for N_m unit Rayleigh amplitudes.
#[test]
fn mean_signal_power_matches_rayleigh_moments() {
    let cfg = two_users(40);
    let model = cfg.channel_model().unwrap();
    let subs = SubSurfaces::new(&cfg.partition);
    let trials = 100_000;
    let mut sum = [0.0; 2];
    for t in 0..trials {
        let state = TrialState::for_trial(&cfg, t).unwrap();
        let fading = model.realize(&state.white, false);
        for (s, l) in sum
            .iter_mut()
            .zip(c2_links(&cfg, &model, &fading, &state, &subs).unwrap())
        {
            *s += l.signal;
        }
    }
    for (m, s) in sum.iter().enumerate() {
        let l = model.c2[m].ris_total_gain();
        let nm = cfg.partition.sizes()[m] as f64;
        let expected = l * (nm + nm * (nm - 1.0) * PI / 4.0);
        let mean = s / trials as f64;
        assert!(
            (mean / expected - 1.0).abs() < 0.01,
            "user {m}: {mean} vs {expected}"
        );
    }
}

#[test]
fn outage_limits() {
    let cfg = two_users(40);
    let zero_target =
        outage_monte_carlo(&cfg, &cfg.partition, dbm_to_watts(10.0), 0.0, 2_000).unwrap();
    assert!(zero_target.iter().all(|e| e.value == 0.0));
    let no_power = outage_monte_carlo(&cfg, &cfg.partition, 1e-25, 1.0, 2_000).unwrap();
    assert!(no_power.iter().all(|e| e.value == 1.0));
}

#[test]
fn uniform_outage_rises_with_users() {
    let values: Vec<f64> = (2..=16)
        .map(|m2| outage_uniform(m2, 32).unwrap().full)
        .collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
}

#[test]
fn ris_noma_without_surface_is_pd_noma() {
    let mut cfg = SystemConfig::new(
        vec![Placement::new(80.0, 84.0)],
        vec![Placement::new(150.0, 146.0), Placement::new(100.0, 104.0)],
        16,
    )
    .unwrap();
    cfg.bs_ris_distance = Some(1e12);
    let sampler = SchemeSampler::new(&cfg, &[Scheme::PdNoma, Scheme::RisNoma]).unwrap();
    for t in 0..50 {
        let s = sampler.sample(t).unwrap();
        let (SchemeSample::Noma(pd), SchemeSample::Noma(ris)) = (&s[0], &s[1]) else {
            panic!("unexpected samples {s:?}");
        };
        for (a, b) in pd.iter().zip(ris) {
            assert!((a - b).abs() <= 1e-9 * a, "{pd:?} vs {ris:?}");
        }
    }
}

#[test]
fn partition_must_cover_the_surface() {
    let cfg = two_users(40);
    let bad = Partition::new(vec![20, 10]).unwrap();
    assert!(ergodic_rate(&cfg, &bad, 1.0, 10).is_err());
}
