//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every function takes plain numbers and returns a JSON string, so the
//! page needs no serialization glue beyond `JSON.parse`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use rbrs_core::channels::{sample_perturbation, sample_rayleigh, PerturbationMode};
use rbrs_core::fbl::{fbl_rate, stationary_point, FblPenalty};
use rbrs_core::linalg::CVector;
use rbrs_core::schemes::bounds::{sampled_worst_case, worst_case_rate_lb, Stream};
use rbrs_core::sdr::Formulation;
use rbrs_core::{BeamformerSet, SystemConfig, C64};

#[derive(Serialize)]
struct Curve {
    /// Penalty coefficient `D`.
    d: f64,
    /// SINR in dB at each sample.
    sinr_db: Vec<f64>,
    shannon: Vec<f64>,
    fbl: Vec<f64>,
    /// Minimizer of the rate and the rate there.
    v0: f64,
    rate_at_v0: f64,
    /// SINR needed for `target_rate`, when one was asked for.
    target_sinr_db: Option<f64>,
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

fn error_json(msg: impl std::fmt::Display) -> String {
    to_json(&serde_json::json!({ "error": msg.to_string() }))
}

/// Shannon and finite-blocklength rate over `[lo_db, hi_db]`, the stationary
/// point, and the SINR reaching `target_rate` (ignored when negative).
#[wasm_bindgen]
pub fn fbl_curve(blocklength: u32, epsilon: f64, lo_db: f64, hi_db: f64, points: u32, target_rate: f64) -> String {
    let pen = match SystemConfig::uniform(1, 1, u64::from(blocklength), epsilon, 1.0, 1.0, 0.0)
        .validate()
        .and_then(|c| FblPenalty::new(c.blocklength, c.epsilon[0]))
    {
        Ok(p) => p,
        Err(e) => return error_json(e),
    };
    let d = pen.coefficient();
    let n = points.max(2) as usize;
    let sinr_db: Vec<f64> = (0..n).map(|i| lo_db + (hi_db - lo_db) * i as f64 / (n - 1) as f64).collect();
    let lin: Vec<f64> = sinr_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
    let v0 = stationary_point(d);
    to_json(&Curve {
        d,
        shannon: lin.iter().map(|&x| x.ln_1p()).collect(),
        fbl: lin.iter().map(|&x| fbl_rate(x, d)).collect(),
        sinr_db,
        v0,
        rate_at_v0: fbl_rate(v0, d),
        target_sinr_db: (target_rate >= 0.0).then(|| 10.0 * pen.target_sinr(target_rate).log10()),
    })
}

#[derive(Serialize)]
struct UserRates {
    /// Rate at the estimate.
    nominal: f64,
    /// Certified lower bound over the ball.
    certified: f64,
    /// Minimum over `n` sampled channels, for each requested `n`.
    sampled: Vec<f64>,
}

#[derive(Serialize)]
struct RobustReport {
    delta: f64,
    sample_counts: Vec<usize>,
    users: Vec<UserRates>,
}

/// Private-stream rates of equal-power matched-filter beams on a seeded
/// Rayleigh channel: nominal, certified worst case over the ball of radius
/// `delta`, and the sampled worst case for growing sample counts.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn robust_rates(
    antennas: u32,
    users: u32,
    blocklength: u32,
    epsilon: f64,
    p_max: f64,
    sigma2: f64,
    delta: f64,
    seed: u64,
) -> String {
    let (m, k) = (antennas.max(1) as usize, users.max(1) as usize);
    let cfg = match SystemConfig::uniform(m, k, u64::from(blocklength), epsilon, p_max, sigma2, delta).validate() {
        Ok(c) => c,
        Err(e) => return error_json(e),
    };
    let form = match Formulation::fbl(&cfg, false) {
        Ok(f) => f,
        Err(e) => return error_json(e),
    };
    let ch = sample_rayleigh(m, k, seed).with_uniform_delta(delta);
    let per_user = (p_max / k as f64).sqrt();
    let design = BeamformerSet {
        w_c: CVector::zeros(m),
        w_k: ch.h_hat.iter().map(|h| h.unscale(h.norm()).scale(per_user)).collect(),
        c: vec![0.0; k],
    };
    let nominal = ch.with_uniform_delta(0.0);
    let counts = vec![10, 100, 1000, 10000];
    let report = RobustReport {
        delta,
        users: (0..k)
            .map(|u| UserRates {
                nominal: worst_case_rate_lb(&design, &nominal, &cfg, &form, u, Stream::Private),
                certified: worst_case_rate_lb(&design, &ch, &cfg, &form, u, Stream::Private),
                sampled: counts
                    .iter()
                    .map(|&n| sampled_worst_case(&design, &ch, &cfg, &form, u, Stream::Private, n, seed ^ 0x5eed))
                    .collect(),
            })
            .collect(),
        sample_counts: counts,
    };
    to_json(&report)
}

#[derive(Serialize)]
struct BallSamples {
    /// Real and imaginary part of the first coordinate of each draw.
    re: Vec<f64>,
    im: Vec<f64>,
    /// Euclidean norm of each full draw.
    norm: Vec<f64>,
}

/// `n` error vectors of dimension `antennas` in the ball of radius `delta`,
/// uniform inside it or on its boundary.
#[wasm_bindgen]
pub fn ball_samples(delta: f64, antennas: u32, n: u32, boundary: bool, seed: u64) -> String {
    if !(delta >= 0.0) {
        return error_json("negative radius");
    }
    let mode = if boundary {
        PerturbationMode::Boundary
    } else {
        PerturbationMode::Interior
    };
    let m = antennas.max(1) as usize;
    let draws: Vec<CVector> = (0..n as u64).map(|i| sample_perturbation(delta, m, seed.wrapping_add(i), mode)).collect();
    let first = |e: &CVector| e.get(0).copied().unwrap_or(C64::new(0.0, 0.0));
    to_json(&BallSamples {
        re: draws.iter().map(|e| first(e).re).collect(),
        im: draws.iter().map(|e| first(e).im).collect(),
        norm: draws.iter().map(|e| e.norm()).collect(),
    })
}
