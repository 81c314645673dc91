use serde::{Deserialize, Serialize};

use super::init::StartPoint;
use super::repair::certify_lifted;
use super::CccpSettings;
use crate::channels::ChannelSet;
use crate::config::{LiftedSolution, SystemConfig};
use crate::conic::{solve, SolveStatus};
use crate::error::{Error, Result};
use crate::sdr::{assemble_subproblem, ExpansionPoint, Formulation};

/// Why the outer loop ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// Objective change within tolerance.
    Converged,
    MaxIterations,
    /// Candidates stayed below the best value by more than the tolerance
    /// after every plateau retry; the best iterate is kept.
    NonAscent,
    /// A subproblem could not be solved even after rescaling; the last
    /// good iterate is kept.
    SolverFailure,
}

#[derive(Clone, Debug)]
pub struct CccpRun {
    /// Certified best iterate.
    pub lifted: LiftedSolution,
    /// Solver objective of the subproblem that produced `lifted`.
    pub relaxation_objective: f64,
    /// Certified objective after each recorded iteration.
    pub trace: Vec<f64>,
    /// Subproblem rounds, including plateau retries.
    pub iterations: usize,
    pub retries: usize,
    pub stop: StopReason,
    /// Objective of the starting point.
    pub t0: f64,
}

/// Slack below which a decrease counts as solver noise.
const ASCENT_SLACK: f64 = 1e-8;

/// Re-linearizations at a rejected candidate before the run gives up.
pub const PLATEAU_RETRIES: usize = 3;

/// Best certified candidate of one outer iteration.
struct Round {
    sol: Option<LiftedSolution>,
    /// Solver objective of `sol`.
    raw_t: f64,
    last_err: Option<Error>,
}

/// Solves the subproblem at `point` in each power unit until one certified
/// iterate does not fall below `prev`; otherwise returns the best one. When
/// no unit gives a solution, the ladder is repeated with the solver's
/// equilibration switched.
fn solve_round(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    form: &Formulation,
    settings: &CccpSettings,
    point: &ExpansionPoint,
    prev: f64,
) -> Result<Round> {
    let mut round = Round {
        sol: None,
        raw_t: f64::NAN,
        last_err: None,
    };
    let mut switched = settings.solver;
    switched.equilibrate = !switched.equilibrate;
    for solver in [&settings.solver, &switched] {
        if round.sol.is_some() {
            break;
        }
        for scale in super::power_scales(cfg) {
            let sp = assemble_subproblem(cfg, ch, form, point, scale)?;
            let out = solve(&sp.problem, solver).and_then(|o| o.into_feasible(solver.accept_tol));
            match out {
                Ok(out) => {
                    let raw = sp.decode(&out.primal);
                    let sol = certify_lifted(&raw, cfg, ch, form);
                    let ascends = sol.t >= prev - ASCENT_SLACK;
                    if round.sol.as_ref().is_none_or(|b| sol.t > b.t) {
                        round.raw_t = raw.t;
                        round.sol = Some(sol);
                    }
                    if ascends {
                        break;
                    }
                    log::debug!("subproblem at scale {scale:e} certified below {prev}");
                }
                Err(e) => {
                    log::debug!("subproblem at scale {scale:e}: {e}");
                    round.last_err = Some(e);
                }
            }
        }
    }
    Ok(round)
}

/// Runs the convex-concave procedure from `start`.
///
/// Each iteration linearizes around the previous iterate and solves the
/// resulting convex restriction, retrying in other power units when a
/// solve is rejected. Every solution is re-certified before use, so the
/// trace holds certified values and never decreases.
///
/// The run converges when the certified value moves by at most `tol`. A
/// candidate that falls below the previous value by more than `tol` is not
/// recorded, but the next subproblem is linearized at it, at most
/// [`PLATEAU_RETRIES`] times. The returned solution is the best recorded
/// iterate.
pub fn cccp_solve(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    form: &Formulation,
    settings: &CccpSettings,
    start: &StartPoint,
) -> Result<CccpRun> {
    settings.validate()?;
    let mut point = start.point.clone();
    let mut prev = start.t0;
    let mut trace = Vec::new();
    let mut best: Option<(LiftedSolution, f64)> = None;
    let mut stop = StopReason::MaxIterations;
    let mut retries = 0;
    let mut iterations = 0;

    while iterations < settings.max_iters {
        iterations += 1;
        let round = solve_round(cfg, ch, form, settings, &point, prev)?;
        let Some(sol) = round.sol else {
            if best.is_none() {
                return Err(round.last_err.unwrap_or_else(|| Error::MalformedProblem("no solve".into())));
            }
            stop = StopReason::SolverFailure;
            break;
        };
        let change = sol.t - prev;
        if change.abs() <= settings.tol {
            if change >= -ASCENT_SLACK {
                trace.push(sol.t);
                best = Some((sol, round.raw_t));
            }
            stop = StopReason::Converged;
            break;
        }
        if change < 0.0 {
            if retries == PLATEAU_RETRIES {
                stop = StopReason::NonAscent;
                break;
            }
            retries += 1;
            point = next_point(&sol, form.rate_splitting);
            continue;
        }
        trace.push(sol.t);
        point = next_point(&sol, form.rate_splitting);
        prev = sol.t;
        best = Some((sol, round.raw_t));
    }
    let Some((lifted, relaxation_objective)) = best else {
        return Err(Error::Solver {
            status: SolveStatus::Inaccurate,
            detail: format!("no iterate reached the starting value {}", start.t0),
        });
    };
    Ok(CccpRun {
        lifted,
        relaxation_objective,
        trace,
        iterations,
        retries,
        stop,
        t0: start.t0,
    })
}

/// Next expansion point; tiny negative `beta` from solver round-off is
/// clipped to zero.
fn next_point(s: &LiftedSolution, rate_splitting: bool) -> ExpansionPoint {
    let clip = |v: &[f64]| v.iter().map(|b| b.max(0.0)).collect::<Vec<_>>();
    let mut p = ExpansionPoint::from_solution(s);
    p.beta_c = clip(&p.beta_c);
    p.beta_p = clip(&p.beta_p);
    if !rate_splitting {
        p.beta_c.clear();
        p.x_c.clear();
        p.y_c.clear();
    }
    p
}
