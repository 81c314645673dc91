//! Certified and sampled worst-case rates of a fixed design.
//!
//! For `|h - h_hat| <= delta`,
//!
//! ```text
//! |h^H w|^2            >= (|h_hat^H w| - delta |w|)_+^2
//! sum_j |h^H w_j|^2    <= sum_j (|h_hat^H w_j| + delta |w_j|)^2
//! ```
//!
//! so the ratio of the two bounds (with noise added below) lower-bounds the
//! SINR over the whole ball, and the rate of that ratio lower-bounds the
//! worst-case rate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{sample_perturbation_with, ChannelSet, PerturbationMode};
use crate::config::{BeamformerSet, SystemConfig};
use crate::fbl::{fbl_rate, stationary_point};
use crate::linalg::{self, CVector};
use crate::sdr::Formulation;

/// Slack used by every feasibility verdict on rates and power.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stream {
    /// The common stream as decoded by a user.
    Common,
    Private,
}

/// `(|h_hat^H w| - delta |w|)^2`, or zero when the difference is negative.
pub fn signal_lb(h_hat: &CVector, w: &CVector, delta: f64) -> f64 {
    (linalg::inner(h_hat, w).norm() - delta * w.norm()).max(0.0).powi(2)
}

/// `(|h_hat^H w| + delta |w|)^2`.
pub fn interference_ub(h_hat: &CVector, w: &CVector, delta: f64) -> f64 {
    (linalg::inner(h_hat, w).norm() + delta * w.norm()).powi(2)
}

/// Signal vector and interferers of `stream` at `user`.
fn stream_parts<'a>(b: &'a BeamformerSet, user: usize, stream: Stream) -> (&'a CVector, Vec<&'a CVector>) {
    match stream {
        Stream::Common => (&b.w_c, b.w_k.iter().collect()),
        Stream::Private => (
            &b.w_k[user],
            b.w_k.iter().enumerate().filter(|(j, _)| *j != user).map(|(_, w)| w).collect(),
        ),
    }
}

fn penalty(form: &Formulation, user: usize, stream: Stream) -> f64 {
    match stream {
        Stream::Common => form.d_common[user],
        Stream::Private => form.d_private[user],
    }
}

/// Certified SINR lower bound of `stream` at `user` over the ball.
pub fn sinr_lb(b: &BeamformerSet, ch: &ChannelSet, sigma2: f64, user: usize, stream: Stream) -> f64 {
    let h = &ch.h_hat[user];
    let delta = ch.delta[user];
    let (w, interferers) = stream_parts(b, user, stream);
    let den: f64 = interferers.iter().map(|v| interference_ub(h, v, delta)).sum::<f64>() + sigma2;
    signal_lb(h, w, delta) / den
}

/// Lower bound on the rate at every channel in the ball.
///
/// The rate only increases with SINR above the stationary point `v0`, so
/// the rate of the SINR bound is used there. Below `v0` the bound falls back
/// to the global minimum `R(v0) <= 0`; a zero signal beamformer has rate
/// exactly zero.
pub fn worst_case_rate_lb(
    b: &BeamformerSet,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    form: &Formulation,
    user: usize,
    stream: Stream,
) -> f64 {
    let xi = sinr_lb(b, ch, cfg.sigma2[user], user, stream);
    let d = penalty(form, user, stream);
    let v0 = stationary_point(d);
    if xi >= v0 {
        fbl_rate(xi, d)
    } else if stream_parts(b, user, stream).0.norm() == 0.0 {
        0.0
    } else {
        fbl_rate(v0, d)
    }
}

/// SINR of `stream` at `user` for a known channel `h`.
pub fn exact_sinr(b: &BeamformerSet, h: &CVector, sigma2: f64, user: usize, stream: Stream) -> f64 {
    let (w, interferers) = stream_parts(b, user, stream);
    let den: f64 = interferers.iter().map(|v| linalg::inner(h, v).norm_sqr()).sum::<f64>() + sigma2;
    linalg::inner(h, w).norm_sqr() / den
}

pub fn exact_rate(b: &BeamformerSet, h: &CVector, sigma2: f64, d: f64, user: usize, stream: Stream) -> f64 {
    fbl_rate(exact_sinr(b, h, sigma2, user, stream), d)
}

/// Minimum rate of `stream` at `user` over `n_samples` draws from the
/// ball, alternating boundary and interior draws. The first `n` draws do
/// not depend on `n_samples`, so sample sets are nested.
#[allow(clippy::too_many_arguments)]
pub fn sampled_worst_case(
    b: &BeamformerSet,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    form: &Formulation,
    user: usize,
    stream: Stream,
    n_samples: usize,
    seed: u64,
) -> f64 {
    assert!(n_samples >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = penalty(form, user, stream);
    let (h_hat, delta) = (&ch.h_hat[user], ch.delta[user]);
    (0..n_samples)
        .map(|i| {
            let mode = if i % 2 == 0 {
                PerturbationMode::Boundary
            } else {
                PerturbationMode::Interior
            };
            let h = h_hat + sample_perturbation_with(delta, ch.m, mode, &mut rng);
            exact_rate(b, &h, cfg.sigma2[user], d, user, stream)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Splits a common rate `capacity` to maximize `min_k (c_k + private_k)`:
/// the water level `T` solves `sum_k (T - private_k)_+ = capacity`.
pub fn allocate_common(capacity: f64, private: &[f64]) -> Vec<f64> {
    let k = private.len();
    if capacity <= 0.0 || k == 0 {
        return vec![0.0; k];
    }
    let mut sorted = private.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Fill the lowest `n` users up to the next level while water remains.
    let mut level = sorted[0];
    let mut remaining = capacity;
    let mut n = 1;
    loop {
        let next = if n < k { sorted[n] } else { f64::INFINITY };
        let need = (next - level) * n as f64;
        if need >= remaining {
            level += remaining / n as f64;
            break;
        }
        remaining -= need;
        level = next;
        n += 1;
    }
    let mut c: Vec<f64> = private.iter().map(|&r| (level - r).max(0.0)).collect();
    // Remove rounding excess so the sum never exceeds the capacity.
    let sum: f64 = c.iter().sum();
    if sum > capacity {
        let f = capacity / sum;
        c.iter_mut().for_each(|v| *v *= f);
    }
    c
}

/// Certified rates of a design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Worst-case common rate bound per user; empty without rate splitting.
    pub common: Vec<f64>,
    pub private: Vec<f64>,
    /// `min_k (c_k + private_k)`.
    pub min_rate: f64,
    pub common_rate_sum: f64,
    /// Common rate decodable by everyone, power within budget and every
    /// private bound nonnegative.
    pub feasible: bool,
}

pub fn evaluate(b: &BeamformerSet, ch: &ChannelSet, cfg: &SystemConfig, form: &Formulation) -> Evaluation {
    let k = cfg.users;
    let private: Vec<f64> = (0..k)
        .map(|u| worst_case_rate_lb(b, ch, cfg, form, u, Stream::Private))
        .collect();
    let common: Vec<f64> = if form.rate_splitting {
        (0..k).map(|u| worst_case_rate_lb(b, ch, cfg, form, u, Stream::Common)).collect()
    } else {
        Vec::new()
    };
    let c_sum = b.common_rate_sum();
    let common_ok = if form.rate_splitting {
        let cap = common.iter().copied().fold(f64::INFINITY, f64::min);
        (c_sum == 0.0 && b.w_c.norm() == 0.0) || c_sum <= cap + FEASIBILITY_TOL
    } else {
        c_sum == 0.0
    };
    let min_rate = (0..k)
        .map(|u| b.c.get(u).copied().unwrap_or(0.0) + private[u])
        .fold(f64::INFINITY, f64::min);
    let feasible = common_ok
        && private.iter().all(|&r| r >= -FEASIBILITY_TOL)
        && b.power() <= cfg.p_max * (1.0 + FEASIBILITY_TOL)
        && b.c.iter().all(|&c| c >= 0.0);
    Evaluation {
        common,
        private,
        min_rate,
        common_rate_sum: c_sum,
        feasible,
    }
}

/// Replaces `c` by the split that maximizes the certified min rate. A
/// common stream no user can decode even at rate zero is switched off.
pub fn rebalance(b: &BeamformerSet, ch: &ChannelSet, cfg: &SystemConfig, form: &Formulation) -> BeamformerSet {
    let k = cfg.users;
    let mut out = b.clone();
    if !form.rate_splitting {
        out.c = vec![0.0; k];
        out.w_c = CVector::zeros(cfg.antennas);
        return out;
    }
    let private: Vec<f64> = (0..k)
        .map(|u| worst_case_rate_lb(b, ch, cfg, form, u, Stream::Private))
        .collect();
    let cap = (0..k)
        .map(|u| worst_case_rate_lb(b, ch, cfg, form, u, Stream::Common))
        .fold(f64::INFINITY, f64::min);
    if cap < 0.0 {
        out.w_c = CVector::zeros(cfg.antennas);
        out.c = vec![0.0; k];
    } else {
        out.c = allocate_common(cap, &private);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::sample_rayleigh;
    use crate::linalg::complex_normal_vector;
    use proptest::prelude::*;

    fn design(m: usize, k: usize, seed: u64) -> BeamformerSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BeamformerSet {
            w_c: complex_normal_vector(&mut rng, m),
            w_k: (0..k).map(|_| complex_normal_vector(&mut rng, m)).collect(),
            c: vec![0.1; k],
        }
    }

    fn setup(delta: f64) -> (SystemConfig, ChannelSet, Formulation) {
        let cfg = SystemConfig::uniform(3, 2, 500, 1e-4, 10.0, 0.1, delta);
        let ch = sample_rayleigh(3, 2, 9).with_uniform_delta(delta);
        let form = Formulation::fbl(&cfg, true).unwrap();
        (cfg, ch, form)
    }

    #[test]
    fn zero_radius_is_nominal() {
        let (cfg, ch, form) = setup(0.0);
        let b = design(3, 2, 1);
        for u in 0..2 {
            for s in [Stream::Common, Stream::Private] {
                let lb = worst_case_rate_lb(&b, &ch, &cfg, &form, u, s);
                let d = if s == Stream::Common { form.d_common[u] } else { form.d_private[u] };
                let nominal = exact_rate(&b, &ch.h_hat[u], cfg.sigma2[u], d, u, s);
                assert!((lb - nominal).abs() < 1e-12);
                let sampled = sampled_worst_case(&b, &ch, &cfg, &form, u, s, 10, 3);
                assert!((sampled - nominal).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_signal_gives_zero_rate() {
        let (cfg, ch, form) = setup(0.01);
        let mut b = design(3, 2, 1);
        b.w_c = CVector::zeros(3);
        assert_eq!(worst_case_rate_lb(&b, &ch, &cfg, &form, 0, Stream::Common), 0.0);
    }

    #[test]
    fn sampled_minimum_is_monotone_in_samples() {
        let (cfg, ch, form) = setup(0.05);
        let b = design(3, 2, 4);
        let mut prev = f64::INFINITY;
        for n in 1..60 {
            let v = sampled_worst_case(&b, &ch, &cfg, &form, 0, Stream::Private, n, 5);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn water_filling() {
        let c = allocate_common(1.0, &[0.5, 2.0, 1.0]);
        // Level 1.25: 0.75 to the first user, 0.25 to the third.
        assert!((c[0] - 0.75).abs() < 1e-12 && c[1] == 0.0 && (c[2] - 0.25).abs() < 1e-12);
        assert_eq!(allocate_common(-1.0, &[0.0, 1.0]), vec![0.0, 0.0]);
        let c = allocate_common(3.0, &[1.0, 1.0]);
        assert!((c[0] - 1.5).abs() < 1e-12 && (c[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn rebalanced_design_is_feasible_and_decomposes() {
        let (cfg, ch, form) = setup(0.01);
        let mut b = design(3, 2, 2);
        b = b.scaled((cfg.p_max / b.power()).sqrt());
        let b = rebalance(&b, &ch, &cfg, &form);
        let ev = evaluate(&b, &ch, &cfg, &form);
        assert!(ev.common_rate_sum <= ev.common.iter().copied().fold(f64::INFINITY, f64::min) + 1e-12);
        let recomputed = (0..2).map(|u| b.c[u] + ev.private[u]).fold(f64::INFINITY, f64::min);
        assert!((recomputed - ev.min_rate).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn certified_bound_below_samples(seed in any::<u64>(), delta in 0.0f64..0.3) {
            let cfg = SystemConfig::uniform(2, 2, 200, 1e-3, 1.0, 0.05, delta);
            let ch = sample_rayleigh(2, 2, seed).with_uniform_delta(delta);
            let form = Formulation::fbl(&cfg, true).unwrap();
            let b = design(2, 2, seed ^ 1);
            for u in 0..2 {
                for s in [Stream::Common, Stream::Private] {
                    let lb = worst_case_rate_lb(&b, &ch, &cfg, &form, u, s);
                    let sampled = sampled_worst_case(&b, &ch, &cfg, &form, u, s, 2000, seed);
                    prop_assert!(lb <= sampled + 1e-9);
                }
            }
        }

        #[test]
        fn water_filling_uses_capacity(cap in 0.0f64..10.0, r in proptest::collection::vec(-1.0f64..5.0, 1..6)) {
            let c = allocate_common(cap, &r);
            let sum: f64 = c.iter().sum();
            prop_assert!(sum <= cap + 1e-12);
            prop_assert!((sum - cap).abs() < 1e-9);
            prop_assert!(c.iter().all(|&v| v >= 0.0));
            // No other split with the same budget raises the minimum: the
            // level is shared by every user that received water.
            let totals: Vec<f64> = r.iter().zip(&c).map(|(a, b)| a + b).collect();
            let min = totals.iter().copied().fold(f64::INFINITY, f64::min);
            for (t, ci) in totals.iter().zip(&c) {
                if *ci > 1e-12 { prop_assert!((t - min).abs() < 1e-9); }
            }
        }
    }
}
