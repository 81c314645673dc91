//! Starting-point search, the convex-concave outer loop, and recovery of
//! beamforming vectors from lifted matrices.

mod cccp;
mod init;
mod recovery;
mod repair;

pub use cccp::{cccp_solve, CccpRun, StopReason};
pub use init::{closed_form_point, feasible_point_search, StartPoint, C0_MAX, MAX_HALVINGS};
pub use recovery::{extract_rank_one, gaussian_randomize, sample_from_covariance, RandomizedDesign};
pub use repair::{certify_lifted, psd_projection, quad_lb, quad_ub};

use crate::conic::SolverSettings;
use crate::config::SystemConfig;

/// Power units tried in order when a conic solve is rejected: a ladder
/// around the geometric mean of the mean noise power and the budget.
pub fn power_scales(cfg: &SystemConfig) -> Vec<f64> {
    let noise = cfg.sigma2.iter().sum::<f64>() / cfg.users as f64;
    let mid = (noise * cfg.p_max).sqrt();
    [1.0, 0.3, 3.0, 0.1, 10.0, 0.03, 30.0].iter().map(|f| f * mid).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CccpSettings {
    /// Stop when the objective changes by at most this much.
    pub tol: f64,
    pub max_iters: usize,
    /// Gaussian draws when a lifted matrix is not rank one.
    pub randomization_draws: usize,
    /// Second-to-first eigenvalue ratio accepted as rank one.
    pub rank_one_ratio_threshold: f64,
    /// Independent starting points; the best certified design is kept.
    pub n_starts: usize,
    pub solver: SolverSettings,
}

impl Default for CccpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 100,
            randomization_draws: 200,
            rank_one_ratio_threshold: 1e-4,
            n_starts: 1,
            solver: SolverSettings::default(),
        }
    }
}

impl CccpSettings {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |field, reason: &str| {
            Err(crate::Error::Config {
                field,
                reason: reason.into(),
            })
        };
        if !(self.tol > 0.0) {
            return bad("tol", "tolerance must be positive");
        }
        if self.max_iters < 1 {
            return bad("max_iters", "need at least one iteration");
        }
        if self.randomization_draws < 1 {
            return bad("randomization_draws", "need at least one draw");
        }
        if self.n_starts < 1 {
            return bad("n_starts", "need at least one start");
        }
        Ok(())
    }
}
