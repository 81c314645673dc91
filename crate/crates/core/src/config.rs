//! Shared domain types: system parameters, beamformers, lifted solutions and
//! per-run results.
//!
//! Rates are in nats/s/Hz and powers in linear mW everywhere in the crate.
//! Configs written in dBm are converted once with [`dbm_to_mw`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, serde_cvec, CMatrix, CVector};
use crate::schemes::SchemeId;

/// System parameters. Per-user quantities are stored one entry per user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Transmit antennas.
    #[serde(rename = "M")]
    pub antennas: usize,
    /// Single-antenna users.
    #[serde(rename = "K")]
    pub users: usize,
    /// Blocklength in channel uses, shared by the common and private streams.
    #[serde(rename = "L")]
    pub blocklength: u64,
    /// Block error rate per user.
    pub epsilon: Vec<f64>,
    /// Power budget in mW.
    #[serde(rename = "P_max")]
    pub p_max: f64,
    /// Noise power per user, linear mW.
    pub sigma2: Vec<f64>,
    /// Uncertainty-ball radius per user.
    pub delta: Vec<f64>,
    /// CSIT quality exponent per user.
    pub alpha: Vec<f64>,
    /// Error-scaling coefficient for `delta = d * P^-alpha`.
    #[serde(default)]
    pub d: f64,
}

impl SystemConfig {
    /// Configuration with identical per-user parameters and `alpha = 0`.
    pub fn uniform(
        antennas: usize,
        users: usize,
        blocklength: u64,
        epsilon: f64,
        p_max: f64,
        sigma2: f64,
        delta: f64,
    ) -> Self {
        Self {
            antennas,
            users,
            blocklength,
            epsilon: vec![epsilon; users],
            p_max,
            sigma2: vec![sigma2; users],
            delta: vec![delta; users],
            alpha: vec![0.0; users],
            d: 0.0,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = vec![delta; self.users];
        self
    }

    /// Replace every radius by `d * P_max^-alpha_k`.
    pub fn with_scaled_radii(mut self, d: f64, alpha: f64) -> Self {
        self.d = d;
        self.alpha = vec![alpha; self.users];
        self.delta = self
            .alpha
            .iter()
            .map(|&a| effective_radius(d, self.p_max, a))
            .collect();
        self
    }

    pub fn validate(self) -> Result<Self> {
        validate_config(self)
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Config {
        field,
        reason: reason.into(),
    }
}

/// Checks every invariant of [`SystemConfig`] and returns it unchanged.
/// The error names the first violated field.
pub fn validate_config(cfg: SystemConfig) -> Result<SystemConfig> {
    if cfg.antennas < 1 {
        return Err(invalid("M", "antenna count must be at least 1"));
    }
    if cfg.users < 1 {
        return Err(invalid("K", "user count must be at least 1"));
    }
    if cfg.blocklength < 1 {
        return Err(invalid("L", "blocklength must be at least 1"));
    }
    let k = cfg.users;
    for (field, len) in [
        ("epsilon", cfg.epsilon.len()),
        ("sigma2", cfg.sigma2.len()),
        ("delta", cfg.delta.len()),
        ("alpha", cfg.alpha.len()),
    ] {
        if len != k {
            return Err(invalid(field, format!("expected {k} entries, got {len}")));
        }
    }
    if let Some(e) = cfg.epsilon.iter().find(|&&e| !(e > 0.0 && e < 0.5)) {
        return Err(invalid("epsilon", format!("epsilon out of range (0, 0.5): {e}")));
    }
    if !(cfg.p_max > 0.0 && cfg.p_max.is_finite()) {
        return Err(invalid("P_max", format!("power budget must be positive: {}", cfg.p_max)));
    }
    if let Some(s) = cfg.sigma2.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
        return Err(invalid("sigma2", format!("noise power must be positive: {s}")));
    }
    if let Some(d) = cfg.delta.iter().find(|&&d| !(d >= 0.0 && d.is_finite())) {
        return Err(invalid("delta", format!("negative radius: {d}")));
    }
    if let Some(a) = cfg.alpha.iter().find(|&&a| !(0.0..=1.0).contains(&a)) {
        return Err(invalid("alpha", format!("CSIT exponent outside [0, 1]: {a}")));
    }
    if !(cfg.d >= 0.0 && cfg.d.is_finite()) {
        return Err(invalid("d", format!("error-scaling coefficient must be nonnegative: {}", cfg.d)));
    }
    Ok(cfg)
}

/// `d * P^-alpha`, the radius of a CSIT error that shrinks with transmit power.
pub fn effective_radius(d: f64, p: f64, alpha: f64) -> f64 {
    debug_assert!(d >= 0.0 && p > 0.0 && (0.0..=1.0).contains(&alpha));
    if alpha == 0.0 {
        return d;
    }
    d * p.powf(-alpha)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Beamforming vectors and the rate-split vector of one design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamformerSet {
    /// Common-stream beamformer. All zeros when the design carries no
    /// common stream.
    #[serde(with = "serde_cvec")]
    pub w_c: CVector,
    /// Private beamformers, one per user.
    #[serde(with = "serde_cvec::list")]
    pub w_k: Vec<CVector>,
    /// Common-rate share per user (nats/s/Hz).
    pub c: Vec<f64>,
}

impl BeamformerSet {
    pub fn power(&self) -> f64 {
        linalg::norm_sqr(&self.w_c) + self.w_k.iter().map(linalg::norm_sqr).sum::<f64>()
    }

    pub fn common_rate_sum(&self) -> f64 {
        self.c.iter().sum()
    }

    pub fn users(&self) -> usize {
        self.w_k.len()
    }

    /// Multiplies every beamformer by `factor` (power scales by its square).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            w_c: self.w_c.scale(factor),
            w_k: self.w_k.iter().map(|w| w.scale(factor)).collect(),
            c: self.c.clone(),
        }
    }
}

/// Optimum of one lifted (rank-relaxed) subproblem, in physical units.
#[derive(Clone, Debug)]
pub struct LiftedSolution {
    pub w_c: CMatrix,
    pub w_k: Vec<CMatrix>,
    pub c: Vec<f64>,
    /// Min-rate objective.
    pub t: f64,
    pub beta_c: Vec<f64>,
    pub x_c: Vec<f64>,
    pub y_c: Vec<f64>,
    pub t_c: Vec<f64>,
    pub q_c: Vec<f64>,
    pub beta_p: Vec<f64>,
    pub x_p: Vec<f64>,
    pub y_p: Vec<f64>,
    pub t_p: Vec<f64>,
    pub q_p: Vec<f64>,
    pub lambda_c: Vec<f64>,
    pub lambda_bar_c: Vec<f64>,
    pub lambda_p: Vec<f64>,
    pub lambda_bar_p: Vec<f64>,
}

impl LiftedSolution {
    pub fn trace_power(&self) -> f64 {
        linalg::trace_re(&self.w_c) + self.w_k.iter().map(linalg::trace_re).sum::<f64>()
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        std::iter::once(&self.w_c)
            .chain(self.w_k.iter())
            .map(linalg::hermitian_defect)
            .fold(0.0, f64::max)
    }
}

/// Outcome of one scheme run on one channel realization.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme_id: SchemeId,
    /// Certified worst-case max-min rate of the returned design.
    pub min_rate: f64,
    pub common_rate_sum: f64,
    /// Convex subproblems solved by the outer loop.
    pub iterations: usize,
    /// Relaxation objective after each outer iteration.
    pub objective_trace: Vec<f64>,
    pub feasible: bool,
    /// Whether the outer loop stopped on the objective tolerance.
    #[serde(default)]
    pub converged: bool,
    /// Whether every lifted beamformer passed the eigenvalue-ratio test.
    pub rank_one: bool,
    pub wall_time: f64,
    /// Largest second-to-first eigenvalue ratio of the final lifted matrices.
    pub rank_ratio: f64,
    /// Final relaxation objective.
    pub relaxation_objective: f64,
    /// Set when the beamformers came from Gaussian randomization.
    pub randomized: bool,
    pub design: Option<BeamformerSet>,
}
