use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::recovery::{extract_rank_one, sample_from_covariance};
use super::CccpSettings;
use crate::channels::ChannelSet;
use crate::config::{BeamformerSet, SystemConfig};
use crate::conic::{solve, SolveStatus};
use crate::error::{Error, Result};
use crate::fbl::{fbl_rate, target_sinr_bisect};
use crate::linalg::{self, CVector};
use crate::schemes::bounds::interference_ub;
use crate::sdr::{assemble_feasibility, ExpansionPoint, Formulation};

/// Upper end of the uniform draw of each initial common-rate share.
pub const C0_MAX: f64 = 0.1;
/// How often the initial shares are halved after a failed attempt.
pub const MAX_HALVINGS: usize = 5;

/// Feasible starting point of the outer loop.
#[derive(Clone, Debug)]
pub struct StartPoint {
    pub design: BeamformerSet,
    pub point: ExpansionPoint,
    /// Min rate of the start under the closed-form bounds.
    pub t0: f64,
    /// Feasibility problems solved.
    pub attempts: usize,
}

/// Auxiliary variables of one stream from the closed-form ball bounds:
/// `x = ln (|h^H w| - delta |w|)^2`, `y = ln (sum_j (|h^H w_j| + delta |w_j|)^2 + s2)`,
/// `beta = exp(x - y)`.
fn stream_point(h: &CVector, delta: f64, w: &CVector, interferers: &[&CVector], sigma2: f64) -> Option<(f64, f64, f64)> {
    let amp = linalg::inner(h, w).norm() - delta * w.norm();
    if !(amp > 0.0) {
        return None;
    }
    let x = 2.0 * amp.ln();
    let y = (interferers.iter().map(|v| interference_ub(h, v, delta)).sum::<f64>() + sigma2).ln();
    Some((x, y, (x - y).exp()))
}

/// Expansion point and min rate of a fixed design.
///
/// The common shares `c` are scaled down, if needed, so their sum fits the
/// weakest common-rate bound. Fails when a signal bound is not positive or
/// no user can decode the common stream even at rate zero.
pub fn closed_form_point(
    design: &BeamformerSet,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    form: &Formulation,
) -> Result<(ExpansionPoint, BeamformerSet, f64)> {
    let k = cfg.users;
    let mut point = ExpansionPoint {
        beta_c: Vec::new(),
        x_c: Vec::new(),
        y_c: Vec::new(),
        beta_p: Vec::with_capacity(k),
        x_p: Vec::with_capacity(k),
        y_p: Vec::with_capacity(k),
    };
    let mut out = design.clone();
    if form.rate_splitting {
        let all: Vec<&CVector> = design.w_k.iter().collect();
        let mut cap = f64::INFINITY;
        for u in 0..k {
            let (x, y, beta) = stream_point(&ch.h_hat[u], ch.delta[u], &design.w_c, &all, cfg.sigma2[u])
                .ok_or(Error::DegenerateSignal { user: u, stream: "common" })?;
            point.x_c.push(x);
            point.y_c.push(y);
            point.beta_c.push(beta);
            cap = cap.min(fbl_rate(beta, form.d_common[u]));
        }
        if cap < 0.0 {
            return Err(Error::DegenerateSignal { user: 0, stream: "common" });
        }
        let sum = design.common_rate_sum();
        if sum > cap {
            let f = cap / sum;
            out.c.iter_mut().for_each(|c| *c *= f);
        }
    } else {
        out.c = vec![0.0; k];
    }
    let mut t0 = f64::INFINITY;
    for u in 0..k {
        let others: Vec<&CVector> = design.w_k.iter().enumerate().filter(|(j, _)| *j != u).map(|(_, w)| w).collect();
        let (x, y, beta) = stream_point(&ch.h_hat[u], ch.delta[u], &design.w_k[u], &others, cfg.sigma2[u])
            .ok_or(Error::DegenerateSignal { user: u, stream: "private" })?;
        point.x_p.push(x);
        point.y_p.push(y);
        point.beta_p.push(beta);
        t0 = t0.min(out.c[u] + fbl_rate(beta, form.d_private[u]));
    }
    Ok((point, out, t0))
}

/// Finds a design that meets the worst-case SINR targets of a random rate
/// split and turns it into an expansion point.
///
/// Each attempt draws `c_k ~ U[0, C0_MAX]` (halved after every failure),
/// sets the common target to the SINR of rate `sum c` and the private
/// target to the SINR of rate zero, solves the robust feasibility problem,
/// and recovers beamformers from its lifted solution: the principal
/// eigenvectors when they give a valid start, otherwise Gaussian draws.
pub fn feasible_point_search(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    form: &Formulation,
    settings: &CccpSettings,
    seed: u64,
) -> Result<StartPoint> {
    let k = cfg.users;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c0: Vec<f64> = if form.rate_splitting {
        (0..k).map(|_| rng.random::<f64>() * C0_MAX).collect()
    } else {
        vec![0.0; k]
    };
    let mut last_err = String::new();
    let mut attempts = 0;
    let scales = super::power_scales(cfg);
    for _ in 0..=MAX_HALVINGS {
        let sum: f64 = c0.iter().sum();
        let a_c: Vec<f64> = if form.rate_splitting {
            form.d_common.iter().map(|&d| target_sinr_bisect(sum, d)).collect()
        } else {
            Vec::new()
        };
        let a_p: Vec<f64> = form.d_private.iter().map(|&d| target_sinr_bisect(0.0, d)).collect();

        let mut lifted = None;
        for &scale in &scales {
            attempts += 1;
            let fp = assemble_feasibility(cfg, ch, &a_c, &a_p, scale)?;
            let out = solve(&fp.problem, &settings.solver)?;
            match out.status {
                SolveStatus::Optimal => {
                    lifted = Some(fp.decode(&out.primal));
                    break;
                }
                SolveStatus::Infeasible => {
                    last_err = "robust SINR targets infeasible".into();
                    break;
                }
                _ => last_err = format!("feasibility solve {}", out.backend_status),
            }
        }
        if let Some((w_c, w_k)) = lifted {
            let principal = BeamformerSet {
                w_c: if form.rate_splitting { extract_rank_one(&w_c).0 } else { CVector::zeros(cfg.antennas) },
                w_k: w_k.iter().map(|w| extract_rank_one(w).0).collect(),
                c: c0.clone(),
            };
            let mut best: Option<StartPoint> = None;
            let mut consider = |cand: BeamformerSet, best: &mut Option<StartPoint>| {
                match closed_form_point(&cand, cfg, ch, form) {
                    Ok((point, design, t0)) => {
                        if best.as_ref().is_none_or(|b| t0 > b.t0) {
                            *best = Some(StartPoint { design, point, t0, attempts });
                        }
                    }
                    Err(e) => last_err = e.to_string(),
                }
            };
            consider(principal, &mut best);
            if best.is_none() {
                for _ in 0..settings.randomization_draws {
                    let mut cand = BeamformerSet {
                        w_c: if form.rate_splitting {
                            sample_from_covariance(&w_c, &mut rng)
                        } else {
                            CVector::zeros(cfg.antennas)
                        },
                        w_k: w_k.iter().map(|w| sample_from_covariance(w, &mut rng)).collect(),
                        c: c0.clone(),
                    };
                    let p = cand.power();
                    if p > cfg.p_max {
                        cand = cand.scaled((cfg.p_max / p).sqrt() * (1.0 - 1e-12));
                    }
                    consider(cand, &mut best);
                }
            }
            if let Some(start) = best {
                return Ok(start);
            }
        }
        c0.iter_mut().for_each(|c| *c *= 0.5);
    }
    Err(Error::InfeasibleStart {
        attempts,
        detail: last_err,
    })
}
