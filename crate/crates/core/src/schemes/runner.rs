use std::time::Instant;

use rayon::prelude::*;

use super::bounds::{evaluate, rebalance};
use super::SchemeId;
use crate::algorithms::{
    cccp_solve, closed_form_point, extract_rank_one, feasible_point_search, gaussian_randomize,
    CccpRun, CccpSettings, StartPoint, StopReason,
};
use crate::channels::{sample_rayleigh, ChannelSet};
use crate::config::{BeamformerSet, SchemeResult, SystemConfig};
use crate::error::Result;
use crate::linalg::{derive_seed, CVector};
use crate::sdr::Formulation;

/// Outer-loop restarts from a randomized design that beats the relaxation.
pub const MAX_RESTARTS: u64 = 3;

struct Recovered {
    design: BeamformerSet,
    rank_one: bool,
    rank_ratio: f64,
}

/// Beamformers from the lifted solution of `run`: principal eigenvectors
/// when every matrix is numerically rank one, Gaussian randomization
/// otherwise.
fn recover(
    run: &CccpRun,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    form: &Formulation,
    settings: &CccpSettings,
    run_seed: u64,
) -> Recovered {
    let lifted = &run.lifted;
    let (w_c, ratio_c) = if form.rate_splitting {
        extract_rank_one(&lifted.w_c)
    } else {
        (CVector::zeros(cfg.antennas), 0.0)
    };
    let private: Vec<_> = lifted.w_k.iter().map(extract_rank_one).collect();
    let rank_ratio = private.iter().map(|p| p.1).fold(ratio_c, f64::max);
    let rank_one = rank_ratio <= settings.rank_one_ratio_threshold;
    let design = if rank_one {
        let raw = BeamformerSet {
            w_c,
            w_k: private.into_iter().map(|p| p.0).collect(),
            c: vec![0.0; cfg.users],
        };
        rebalance(&raw, ch, cfg, form)
    } else {
        let draw_seed = derive_seed(run_seed, u64::MAX);
        gaussian_randomize(lifted, cfg, ch, form, settings.randomization_draws, draw_seed).design
    };
    Recovered {
        design,
        rank_one,
        rank_ratio,
    }
}

/// Runs scheme `id` on one channel set.
///
/// The returned `min_rate` is the certified worst-case min rate of the
/// recovered beamformers under the radii in `ch`, and `design.c` is the
/// common split that attains it.
pub fn run_scheme(
    id: SchemeId,
    cfg: &SystemConfig,
    ch: &ChannelSet,
    settings: &CccpSettings,
    seed: u64,
) -> Result<SchemeResult> {
    settings.validate()?;
    let started = Instant::now();
    let form = id.formulation(cfg)?;
    let design_ch = if id.robust() { ch.clone() } else { ch.with_uniform_delta(0.0) };

    let mut best: Option<SchemeResult> = None;
    let mut last_err = None;
    for s in 0..settings.n_starts as u64 {
        let run_seed = derive_seed(seed, s);
        let attempt = (|| -> Result<SchemeResult> {
            let start = feasible_point_search(cfg, &design_ch, &form, settings, run_seed)?;
            let mut run = cccp_solve(cfg, &design_ch, &form, settings, &start)?;
            let mut iterations = run.iterations;
            let mut trace = run.trace.clone();
            let mut restarts = 0;
            let mut recovered = recover(&run, cfg, &design_ch, &form, settings, run_seed);
            // A randomized design that beats the relaxation shows the outer
            // loop stopped at a poor stationary point; resume from it. A
            // design without a common stream lies on the branch where the
            // common rate is exactly zero, which only the formulation
            // without rate splitting can reach.
            let mut run_form = form.clone();
            while !recovered.rank_one && restarts < MAX_RESTARTS {
                let value = evaluate(&recovered.design, &design_ch, cfg, &form).min_rate;
                if value <= run.relaxation_objective + settings.tol {
                    break;
                }
                if run_form.rate_splitting && recovered.design.w_c.iter().all(|z| z.norm() == 0.0) {
                    run_form.rate_splitting = false;
                }
                let Ok((point, design, t0)) = closed_form_point(&recovered.design, cfg, &design_ch, &run_form) else {
                    break;
                };
                let restart = StartPoint {
                    design,
                    point,
                    t0,
                    attempts: 0,
                };
                let Ok(next) = cccp_solve(cfg, &design_ch, &run_form, settings, &restart) else {
                    break;
                };
                restarts += 1;
                iterations += next.iterations;
                trace.extend_from_slice(&next.trace);
                run = next;
                recovered = recover(&run, cfg, &design_ch, &run_form, settings, derive_seed(run_seed, restarts));
            }
            let ev = evaluate(&recovered.design, ch, cfg, &form);
            Ok(SchemeResult {
                scheme_id: id,
                min_rate: ev.min_rate,
                common_rate_sum: ev.common_rate_sum,
                iterations,
                objective_trace: trace,
                feasible: ev.feasible,
                converged: run.stop == StopReason::Converged,
                rank_one: recovered.rank_one,
                wall_time: 0.0,
                rank_ratio: recovered.rank_ratio,
                relaxation_objective: run.relaxation_objective,
                randomized: !recovered.rank_one,
                design: Some(recovered.design),
            })
        })();
        match attempt {
            Ok(r) => {
                let better = best
                    .as_ref()
                    .is_none_or(|b| (r.feasible, r.min_rate) > (b.feasible, b.min_rate));
                if better {
                    best = Some(r);
                }
            }
            Err(e) => {
                log::warn!("{id} start {s} failed: {e}");
                last_err = Some(e);
            }
        }
    }
    match best {
        Some(mut r) => {
            r.wall_time = started.elapsed().as_secs_f64();
            Ok(r)
        }
        None => Err(last_err.expect("at least one start")),
    }
}

/// Feasible runs out of a batch of Rayleigh realizations.
#[derive(Clone, Debug)]
pub struct FeasibilityCount {
    pub feasible: usize,
    pub total: usize,
    /// Per-realization outcome, in realization order.
    pub results: Vec<Result<SchemeResult>>,
}

/// Runs `id` on `n` Rayleigh realizations drawn from seeds derived from
/// `seed`, in parallel. Channel `i` and its run seed depend only on
/// `(seed, i)`, so results do not depend on the worker count.
pub fn run_realizations(
    id: SchemeId,
    cfg: &SystemConfig,
    n: usize,
    seed: u64,
    settings: &CccpSettings,
) -> Vec<Result<SchemeResult>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let ch_seed = derive_seed(seed, 2 * i as u64);
            let ch = sample_rayleigh(cfg.antennas, cfg.users, ch_seed).with_delta(&cfg.delta);
            run_scheme(id, cfg, &ch, settings, derive_seed(seed, 2 * i as u64 + 1))
        })
        .collect()
}

/// Counts realizations on which `id` returns a feasible design; failed
/// runs count as infeasible.
pub fn feasibility_count(
    id: SchemeId,
    cfg: &SystemConfig,
    n: usize,
    seed: u64,
    settings: &CccpSettings,
) -> FeasibilityCount {
    let results = run_realizations(id, cfg, n, seed, settings);
    let feasible = results.iter().filter(|r| matches!(r, Ok(s) if s.feasible)).count();
    FeasibilityCount {
        feasible,
        total: n,
        results,
    }
}
