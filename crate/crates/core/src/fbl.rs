//! Finite-blocklength rate model.
//!
//! The normal approximation used throughout is
//!
//! ```text
//! R(xi) = ln(1 + xi) - sqrt(V(xi)) * D,   V(xi) = 1 - (1 + xi)^-2,
//! D = Qinv(eps) / sqrt(L)
//! ```
//!
//! in nats/s/Hz. `R` decreases on `[0, v0]` and increases on `[v0, inf)`;
//! the SINR targets used for feasibility live on the increasing branch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian tail probability `Q(x) = erfc(x / sqrt 2) / 2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of [`q_function`] on `(0, 1)` by bisection on `erfc`.
///
/// Bisection runs until the bracket stops shrinking in floating point, so
/// the result is the double nearest the root up to the accuracy of `erfc`.
pub fn q_inv(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain {
            function: "q_inv",
            value: epsilon,
        });
    }
    if epsilon == 0.5 {
        return Ok(0.0);
    }
    // Q(38.5) underflows below the smallest normal double.
    let (mut lo, mut hi) = (-38.5_f64, 38.5_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if q_function(mid) > epsilon {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Channel dispersion `1 - (1 + xi)^-2`, computed as `xi (2 + xi) / (1 + xi)^2`
/// to avoid cancellation for small SINR.
pub fn dispersion(xi: f64) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(Error::Domain {
            function: "dispersion",
            value: xi,
        });
    }
    Ok(dispersion_unchecked(xi))
}

#[inline]
fn dispersion_unchecked(xi: f64) -> f64 {
    if xi.is_infinite() {
        return 1.0;
    }
    let z = 1.0 + xi;
    xi * (2.0 + xi) / (z * z)
}

/// Achievable rate in nats/s/Hz for SINR `xi` and penalty coefficient `d`.
/// Negative SINR is treated as zero. The value may be negative for small
/// `xi` and large `d`.
pub fn fbl_rate(xi: f64, d: f64) -> f64 {
    debug_assert!(!xi.is_nan() && d >= 0.0);
    let xi = xi.max(0.0);
    if d == 0.0 {
        return xi.ln_1p();
    }
    xi.ln_1p() - dispersion_unchecked(xi).sqrt() * d
}

/// SINR `v0` at which [`fbl_rate`] attains its minimum for penalty `d`.
pub fn stationary_point(d: f64) -> f64 {
    debug_assert!(d >= 0.0);
    ((1.0 + (1.0 + 4.0 * d * d).sqrt()) / 2.0).sqrt() - 1.0
}

/// Smallest SINR `gamma >= v0` with `fbl_rate(gamma, d) = r`, by bisection
/// on `[v0, exp(r + 4d)]`.
///
/// The upper end brackets the root because the dispersion factor is below
/// one, so `fbl_rate(gamma) > ln(1 + gamma) - d > r` there.
pub fn target_sinr_bisect(r: f64, d: f64) -> f64 {
    debug_assert!(r >= 0.0 && d >= 0.0);
    let r = r.max(0.0);
    if d == 0.0 {
        return r.exp_m1();
    }
    let mut lo = stationary_point(d);
    let mut hi = (r + 4.0 * d).exp();
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fbl_rate(mid, d) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // `hi` always satisfies rate >= r.
    hi
}

/// Largest number of series terms [`target_sinr_series`] evaluates.
pub const SERIES_MAX_TERMS: usize = 50;
/// A term below this magnitude ends the series.
pub const SERIES_TERM_TOL: f64 = 1e-12;

/// Closed-form target SINR through a generalized Lambert function.
///
/// Squaring `ln(1 + gamma) - r = d sqrt(V(gamma))` with `x = 2 (ln(1+gamma) - r)`
/// gives `(x - 2d)(x + 2d) e^x = -4 d^2 e^{-2r}`, whose root near `2d` is
/// `W(2d, -2d; mu)` with
///
/// ```text
/// W(t1, t2; mu) = t1 - sum_{m>=1} 1/(m m!) (mu m e^{-t1} / (t2 - t1))^m
///                      * sum_{n=0}^{m-1} (m-1+n)! / (n! (m-1-n)!) (-1 / (m (t2 - t1)))^n
/// ```
///
/// and then `gamma = exp(r + x/2) - 1`. Every term is positive here, so the
/// series is summed in log space. It returns [`Error::SeriesNotConverged`]
/// if no term drops below [`SERIES_TERM_TOL`] within [`SERIES_MAX_TERMS`];
/// callers fall back to [`target_sinr_bisect`]. At `r = 0` the argument sits
/// on the boundary of the convergence disc and the series does not settle.
pub fn target_sinr_series(r: f64, d: f64) -> Result<f64> {
    debug_assert!(r >= 0.0 && d >= 0.0);
    if d == 0.0 {
        return Ok(r.exp_m1());
    }
    let t1 = 2.0 * d;
    let gap = 4.0 * d; // t1 - t2
    let mu_abs = 4.0 * d * d * (-2.0 * r).exp();
    let ln_fact = ln_factorials(2 * SERIES_MAX_TERMS);

    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    for m in 1..=SERIES_MAX_TERMS {
        let mf = m as f64;
        // Inner Bessel-polynomial sum; all terms positive since t2 - t1 < 0.
        let ln_arg = -(mf * gap).ln();
        let inner: f64 = (0..m)
            .map(|n| {
                (ln_fact[m - 1 + n] - ln_fact[n] - ln_fact[m - 1 - n] + n as f64 * ln_arg).exp()
            })
            .sum();
        let ln_term = -mf.ln() - ln_fact[m] + mf * (mu_abs * mf * (-t1).exp() / gap).ln()
            + inner.ln();
        let term = ln_term.exp();
        sum += term;
        last = term;
        if term < SERIES_TERM_TOL {
            let x = t1 - sum;
            return Ok((r + 0.5 * x).exp_m1());
        }
    }
    Err(Error::SeriesNotConverged {
        terms: SERIES_MAX_TERMS,
        last_term: last,
    })
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    for k in 1..=n {
        out.push(out[k - 1] + (k as f64).ln());
    }
    out
}

/// Penalty coefficient `D = Qinv(eps) / sqrt(L)` of one stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FblPenalty {
    d: f64,
    blocklength: Option<u64>,
    epsilon: f64,
}

impl FblPenalty {
    pub fn new(blocklength: u64, epsilon: f64) -> Result<Self> {
        if blocklength == 0 {
            return Err(Error::Domain {
                function: "FblPenalty::new",
                value: 0.0,
            });
        }
        let d = q_inv(epsilon)? / (blocklength as f64).sqrt();
        Ok(Self {
            d,
            blocklength: Some(blocklength),
            epsilon,
        })
    }

    /// The infinite-blocklength limit, `D = 0`.
    pub fn infinite(epsilon: f64) -> Self {
        Self {
            d: 0.0,
            blocklength: None,
            epsilon,
        }
    }

    pub fn coefficient(&self) -> f64 {
        self.d
    }

    pub fn blocklength(&self) -> Option<u64> {
        self.blocklength
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rate(&self, xi: f64) -> f64 {
        fbl_rate(xi, self.d)
    }

    pub fn target_sinr(&self, r: f64) -> f64 {
        target_sinr_bisect(r, self.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Penalty for L = 1000, eps = 1e-5; 40-digit reference 0.13486768880679931.
    const D_1000: f64 = 0.134_867_688_806_799_3;

    #[test]
    fn q_inv_examples() {
        assert_eq!(q_inv(0.5).unwrap(), 0.0);
        // 40-digit bisection on erfc: 4.264890793922824628...
        assert!((q_inv(1e-5).unwrap() - 4.264_890_793_922_825).abs() < 1e-12);
        assert!(q_inv(0.0).is_err());
        assert!(q_inv(1.0).is_err());
        assert!(q_inv(-0.2).is_err());
        assert!(q_inv(0.6).unwrap() < 0.0);
    }

    #[test]
    fn q_inv_roundtrip() {
        for p in 1..=7 {
            let eps = 10f64.powi(-p);
            let x = q_inv(eps).unwrap();
            assert!((q_function(x) - eps).abs() <= 1e-12, "eps={eps}");
        }
    }

    #[test]
    fn q_inv_agrees_with_independent_normal_quantile() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = Normal::new(0.0, 1.0).unwrap();
        for eps in [1e-7, 1e-5, 1e-3, 0.01, 0.1, 0.3] {
            let reference = -n.inverse_cdf(eps);
            assert!((q_inv(eps).unwrap() - reference).abs() < 1e-8, "eps={eps}");
        }
    }

    #[test]
    fn dispersion_examples() {
        assert_eq!(dispersion(0.0).unwrap(), 0.0);
        assert_eq!(dispersion(1.0).unwrap(), 0.75);
        assert!((dispersion(1e12).unwrap() - 1.0).abs() < 1e-11);
        assert_eq!(dispersion(f64::INFINITY).unwrap(), 1.0);
        assert!(dispersion(-1e-3).is_err());
    }

    #[test]
    fn penalty_matches_reference() {
        let p = FblPenalty::new(1000, 1e-5).unwrap();
        assert!((p.coefficient() - D_1000).abs() < 1e-14);
        assert_eq!(FblPenalty::infinite(1e-5).coefficient(), 0.0);
    }

    #[test]
    fn rate_examples() {
        for xi in [0.0, 0.3, 10.0, 1e4] {
            assert_eq!(fbl_rate(xi, 0.0), xi.ln_1p());
        }
        assert_eq!(fbl_rate(0.0, 0.7), 0.0);
        // ln(11) - sqrt(1 - 1/121) * D, 40-digit reference 2.2635860447291505.
        assert!((fbl_rate(10.0, D_1000) - 2.263_586_044_729_150_6).abs() < 1e-12);
    }

    #[test]
    fn stationary_point_examples() {
        assert_eq!(stationary_point(0.0), 0.0);
        // Closed form evaluated at D = 0.13487 in 40 digits: 0.00889571313679.
        assert!((stationary_point(0.134_87) - 0.008_895_713_136_791).abs() < 1e-12);
        assert!((stationary_point(D_1000) - 0.008_895_414_838_538_7).abs() < 1e-12);
        let v0 = stationary_point(D_1000);
        let r0 = fbl_rate(v0, D_1000);
        for i in 0..50 {
            let g = v0 + 0.01 * i as f64 * (1.0 + i as f64);
            assert!(r0 <= fbl_rate(g, D_1000) + 1e-15);
        }
        // Decreasing on [0, v0].
        assert!(fbl_rate(v0 / 2.0, D_1000) > r0);
        assert!(r0 <= 0.0);
    }

    #[test]
    fn bisect_examples() {
        for r in [0.0, 0.5, 1.0, 3.0] {
            assert!((target_sinr_bisect(r, 0.0) - r.exp_m1()).abs() < 1e-12);
        }
        assert_eq!(target_sinr_bisect(0.0, 0.0), 0.0);
        let g = target_sinr_bisect(1.0, D_1000);
        assert!((fbl_rate(g, D_1000) - 1.0).abs() <= 1e-10);
        // 40-digit oracle: 2.088240001061434.
        assert!((g - 2.088_240_001_061_434).abs() < 1e-9);
        // Zero-rate target for L=1000: 0.03575436720256222.
        assert!((target_sinr_bisect(0.0, D_1000) - 0.035_754_367_202_562_22).abs() < 1e-10);
    }

    #[test]
    fn series_examples() {
        let s = target_sinr_series(0.5, 0.0).unwrap();
        assert!((s - target_sinr_bisect(0.5, 0.0)).abs() < 1e-6);
        assert!((s - 0.5f64.exp_m1()).abs() < 1e-12);
        let s = target_sinr_series(1.0, D_1000).unwrap();
        assert!((s - target_sinr_bisect(1.0, D_1000)).abs() < 1e-6);
        assert!(matches!(
            target_sinr_series(0.0, D_1000),
            Err(Error::SeriesNotConverged { terms: 50, .. })
        ));
    }

    #[test]
    fn series_over_grid_matches_oracle_where_it_converges() {
        let mut converged = 0;
        for l in [200u64, 1000, 3000] {
            for eps in [1e-5, 1e-3] {
                let d = FblPenalty::new(l, eps).unwrap().coefficient();
                for r in [0.0, 0.5, 1.0, 2.0] {
                    if let Ok(s) = target_sinr_series(r, d) {
                        converged += 1;
                        let o = target_sinr_bisect(r, d);
                        assert!((s - o).abs() < 1e-6, "L={l} eps={eps} r={r}: {s} vs {o}");
                    }
                }
            }
        }
        assert_eq!(converged, 18);
    }

    /// The series exactly as typeset (inner sum from n = 1, argument
    /// -2/(2m(t2-t1)), target exp(r + b/2 - 1)). It converges but lands far
    /// from the root; kept to document the deviation.
    fn typeset_series(r: f64, d: f64) -> f64 {
        let (t1, t2) = (2.0 * d, -2.0 * d);
        let mu = -4.0 * (-2.0 * r).exp() * d * d;
        let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        let mut sum = 0.0;
        for m in 1..=50usize {
            let mf = m as f64;
            let inner: f64 = (1..m)
                .map(|n| {
                    fact(m - 1 + n) / (fact(n) * fact(m - 1 - n))
                        * (-2.0 / (2.0 * mf * (t2 - t1))).powi(n as i32)
                })
                .sum();
            sum += 1.0 / (mf * fact(m)) * (mu * mf * (-t1).exp() / (t2 - t1)).powi(m as i32) * inner;
        }
        (r + 0.5 * (t1 - sum) - 1.0).exp()
    }

    #[test]
    fn typeset_series_deviates_from_the_root() {
        let g = typeset_series(1.0, D_1000);
        // mpmath evaluation of the typeset form: 1.144158
        assert!((g - 1.144_158).abs() < 1e-5);
        assert!((g - target_sinr_bisect(1.0, D_1000)).abs() > 0.9);
    }

    proptest! {
        #[test]
        fn monotone_on_increasing_branch(d in 0.0f64..1.0, a in 0.0f64..50.0, b in 0.0f64..50.0) {
            let v0 = stationary_point(d);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(fbl_rate(v0 + lo, d) <= fbl_rate(v0 + hi, d) + 1e-13);
        }

        #[test]
        fn penalty_ordering(xi in 0.0f64..1e4, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0) {
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(fbl_rate(xi, hi) <= fbl_rate(xi, lo) + 1e-15);
        }

        #[test]
        fn shannon_dominance(xi in 0.0f64..1e6, d in 0.0f64..2.0) {
            prop_assert!(fbl_rate(xi, d) <= xi.ln_1p() + 1e-12);
        }

        #[test]
        fn inverse_consistency(r in 0.0f64..8.0, d in 0.0f64..1.0) {
            let g = target_sinr_bisect(r, d);
            prop_assert!(g >= stationary_point(d));
            prop_assert!((fbl_rate(g, d) - r).abs() <= 1e-9);
        }
    }
}
