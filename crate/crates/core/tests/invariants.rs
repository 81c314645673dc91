#![cfg(feature = "solver")]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rbrs_core::algorithms::CccpSettings;
use rbrs_core::channels::{sample_perturbation, sample_rayleigh, ChannelSet, PerturbationMode};
use rbrs_core::schemes::bounds::{evaluate, exact_rate, rebalance, worst_case_rate_lb, Stream};
use rbrs_core::schemes::{run_scheme, SchemeId};
use rbrs_core::sdr::Formulation;
use rbrs_core::{BeamformerSet, CVector, SystemConfig, C64};

fn random_vec(m: usize, scale: f64, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(m, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
}

fn random_design(m: usize, k: usize, seed: u64) -> BeamformerSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BeamformerSet {
        w_c: random_vec(m, 3.0, &mut rng),
        w_k: (0..k).map(|_| random_vec(m, 1.0, &mut rng)).collect(),
        c: vec![0.0; k],
    }
}

fn small_instance(delta: f64) -> (SystemConfig, ChannelSet) {
    let cfg = SystemConfig::uniform(2, 2, 500, 1e-3, 10.0, 1.0, delta);
    let ch = sample_rayleigh(2, 2, 11).with_delta(&cfg.delta);
    (cfg, ch)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn certified_rates_hold_on_the_whole_ball(seed in 0u64..10_000, delta in 0.0f64..0.4) {
        let cfg = SystemConfig::uniform(3, 2, 800, 1e-4, 20.0, 0.5, delta);
        let ch = sample_rayleigh(3, 2, seed).with_delta(&cfg.delta);
        let b = random_design(3, 2, seed + 1);
        let form = Formulation::fbl(&cfg, true).unwrap();
        for u in 0..2 {
            for (stream, d) in [(Stream::Common, form.d_common[u]), (Stream::Private, form.d_private[u])] {
                let lb = worst_case_rate_lb(&b, &ch, &cfg, &form, u, stream);
                for i in 0..64 {
                    let mode = if i % 2 == 0 { PerturbationMode::Boundary } else { PerturbationMode::Interior };
                    let h = &ch.h_hat[u] + sample_perturbation(delta, 3, seed * 64 + i, mode);
                    prop_assert!(exact_rate(&b, &h, cfg.sigma2[u], d, u, stream) >= lb - 1e-9);
                }
            }
        }
    }

    #[test]
    fn rebalanced_split_fits_every_common_bound(seed in 0u64..10_000, delta in 0.0f64..0.2) {
        let cfg = SystemConfig::uniform(3, 3, 1000, 1e-5, 50.0, 1.0, delta);
        let ch = sample_rayleigh(3, 3, seed).with_delta(&cfg.delta);
        let form = Formulation::fbl(&cfg, true).unwrap();
        let b = rebalance(&random_design(3, 3, seed), &ch, &cfg, &form);
        let ev = evaluate(&b, &ch, &cfg, &form);
        prop_assert!(b.c.iter().all(|&c| c >= 0.0));
        if b.w_c.norm() > 0.0 {
            let cap = ev.common.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(ev.common_rate_sum <= cap + 1e-9);
        } else {
            prop_assert_eq!(ev.common_rate_sum, 0.0);
        }
        for u in 0..3 {
            prop_assert!(ev.min_rate <= b.c[u] + ev.private[u] + 1e-12);
        }
    }
}

#[test]
fn outer_loop_ascends_and_returns_a_certified_design() {
    let (cfg, ch) = small_instance(0.05);
    for id in [SchemeId::RbRsFbl, SchemeId::RbNoRsFbl] {
        let r = run_scheme(id, &cfg, &ch, &CccpSettings::default(), 4).unwrap();
        assert!(r.objective_trace.windows(2).all(|w| w[1] >= w[0] - 1e-8), "{id}: {:?}", r.objective_trace);
        assert!(r.converged, "{id}");
        let b = r.design.as_ref().unwrap();
        assert!(b.power() <= cfg.p_max * (1.0 + 1e-9));
        let ev = evaluate(b, &ch, &cfg, &id.formulation(&cfg).unwrap());
        assert!(ev.feasible);
        assert_eq!(ev.min_rate, r.min_rate);
        assert!(r.min_rate >= r.objective_trace.last().unwrap() - 1e-6 || r.randomized);
    }
}

#[test]
fn runs_are_reproducible() {
    let (cfg, ch) = small_instance(0.02);
    let settings = CccpSettings::default();
    let a = run_scheme(SchemeId::RbRsFbl, &cfg, &ch, &settings, 9).unwrap();
    let b = run_scheme(SchemeId::RbRsFbl, &cfg, &ch, &settings, 9).unwrap();
    assert_eq!(a.objective_trace, b.objective_trace);
    assert_eq!(a.design, b.design);
}

#[test]
fn certified_rates_shrink_with_the_radius() {
    let (cfg, ch) = small_instance(0.1);
    let settings = CccpSettings::default();
    let robust = run_scheme(SchemeId::RbRsFbl, &cfg, &ch, &settings, 1).unwrap();
    assert!(robust.feasible);
    let nominal = run_scheme(SchemeId::NoRbRsFbl, &cfg, &ch, &settings, 1).unwrap();
    let form = SchemeId::NoRbRsFbl.formulation(&cfg).unwrap();
    let b = nominal.design.as_ref().unwrap();
    let mut last = f64::INFINITY;
    for delta in [0.0, 0.02, 0.05, 0.1] {
        let ev = evaluate(b, &ch.with_uniform_delta(delta), &cfg, &form);
        assert!(ev.private.iter().all(|r| r.is_finite()));
        assert!(ev.min_rate <= last + 1e-12, "delta {delta}");
        last = ev.min_rate;
    }
    assert_eq!(last, nominal.min_rate);
}
