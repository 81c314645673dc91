//! Expands a config into independent work items and runs them.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use rbrs_core::algorithms::CccpSettings;
use rbrs_core::channels::ChannelSet;
use rbrs_core::config::effective_radius;
use rbrs_core::linalg::derive_seed;
use rbrs_core::schemes::{run_scheme, SchemeId};
use rbrs_core::{SchemeResult, SystemConfig};

use crate::config::{ExperimentConfig, Experiment};

/// One point of the swept axis.
#[derive(Clone, Debug)]
pub struct Point {
    pub grid_value: f64,
    /// CSIT exponent the radii were derived from, if any.
    pub alpha: Option<f64>,
    pub system: SystemConfig,
}

/// Every system configuration the experiment visits, in output order.
pub fn points(exp: Experiment, c: &ExperimentConfig, base: &SystemConfig) -> Vec<Point> {
    let at = |grid_value, system| Point {
        grid_value,
        alpha: None,
        system,
    };
    match exp {
        Experiment::SingleSolve => vec![at(f64::NAN, base.clone())],
        Experiment::Convergence if c.grid.is_empty() => vec![at(base.delta[0], base.clone())],
        Experiment::Convergence => c.grid.iter().map(|&d| at(d, base.clone().with_delta(d))).collect(),
        Experiment::Robustness => c.grid.iter().map(|&d2| at(d2, base.clone().with_delta(d2.sqrt()))).collect(),
        Experiment::SweepBlocklength => c
            .grid
            .iter()
            .map(|&l| {
                at(
                    l,
                    SystemConfig {
                        blocklength: l as u64,
                        ..base.clone()
                    },
                )
            })
            .collect(),
        Experiment::SweepBler => c
            .grid
            .iter()
            .map(|&e| {
                at(
                    e,
                    SystemConfig {
                        epsilon: vec![e; base.users],
                        ..base.clone()
                    },
                )
            })
            .collect(),
        Experiment::SweepSnr => {
            let alphas: Vec<Option<f64>> = if c.alpha_grid.is_empty() {
                vec![None]
            } else {
                c.alpha_grid.iter().copied().map(Some).collect()
            };
            let mut out = Vec::new();
            for alpha in alphas {
                for &p in &c.grid {
                    let mut system = SystemConfig {
                        p_max: p,
                        ..base.clone()
                    };
                    if let Some(a) = alpha {
                        system.alpha = vec![a; base.users];
                    }
                    system.delta = system.alpha.iter().map(|&a| effective_radius(system.d, p, a)).collect();
                    out.push(Point {
                        grid_value: p,
                        alpha,
                        system,
                    });
                }
            }
            out
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Job {
    pub point: usize,
    pub realization: usize,
    pub scheme: SchemeId,
}

/// Outcome of one job. `result` is `Err` with a message on failure.
#[derive(Debug)]
pub struct Outcome {
    pub job: Job,
    pub seed: u64,
    pub channels: Option<ChannelSet>,
    pub result: Result<SchemeResult, String>,
}

/// Inputs shared by every job.
pub struct Plan {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub points: Vec<Point>,
    pub jobs: Vec<Job>,
    pub settings: CccpSettings,
}

impl Plan {
    pub fn new(experiment: Experiment, config: ExperimentConfig, base: &SystemConfig) -> Self {
        let points = points(experiment, &config, base);
        let schemes = config.schemes(experiment);
        let realizations = if experiment == Experiment::SingleSolve {
            1
        } else {
            config.n_realizations
        };
        let mut jobs = Vec::new();
        for point in 0..points.len() {
            for &scheme in &schemes {
                for realization in 0..realizations {
                    jobs.push(Job {
                        point,
                        realization,
                        scheme,
                    });
                }
            }
        }
        let mut settings = CccpSettings {
            n_starts: config.n_starts,
            ..CccpSettings::default()
        };
        if let Some(t) = config.tol {
            settings.tol = t;
        }
        if let Some(m) = config.max_iters {
            settings.max_iters = m;
        }
        Self {
            experiment,
            config,
            points,
            jobs,
            settings,
        }
    }

    /// Channel draws depend only on `(seed, realization)`, so every grid
    /// point and scheme sees the same estimates.
    pub fn channel_seed(&self, realization: usize) -> u64 {
        derive_seed(self.config.seed, realization as u64)
    }

    pub fn run_seed(&self, job: &Job) -> u64 {
        derive_seed(self.channel_seed(job.realization), 1 + job.point as u64)
    }

    fn run_one(&self, job: Job, base_dir: &Path) -> Outcome {
        let point = &self.points[job.point];
        let seed = self.run_seed(&job);
        let channels = match self.config.channel.estimates(&point.system, self.channel_seed(job.realization), base_dir) {
            Ok(ch) => ch.with_delta(&point.system.delta),
            Err(e) => {
                return Outcome {
                    job,
                    seed,
                    channels: None,
                    result: Err(e),
                }
            }
        };
        let result = run_scheme(job.scheme, &point.system, &channels, &self.settings, seed).map_err(|e| e.to_string());
        if let Err(e) = &result {
            log::warn!(
                "{} point {} realization {} failed: {e}",
                job.scheme,
                job.point,
                job.realization
            );
        }
        Outcome {
            job,
            seed,
            channels: Some(channels),
            result,
        }
    }

    /// Runs every job on the current rayon pool; outcomes come back in job
    /// order whatever the scheduling.
    pub fn run(&self, base_dir: &Path) -> Vec<Outcome> {
        self.jobs.par_iter().map(|&job| self.run_one(job, base_dir)).collect()
    }
}

/// Means over the successful runs of one `(scheme, point)` cell.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryPoint {
    pub scheme: SchemeId,
    pub grid_value: Option<f64>,
    pub alpha: Option<f64>,
    pub delta: Vec<f64>,
    pub runs: usize,
    pub failed: usize,
    pub feasible: usize,
    pub converged: usize,
    pub mean_min_rate: Option<f64>,
    pub mean_common_rate_sum: Option<f64>,
    pub mean_iterations: Option<f64>,
    pub rank_one_fraction: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub experiment: Experiment,
    pub seed: u64,
    pub n_realizations: usize,
    pub failed_runs: usize,
    pub points: Vec<SummaryPoint>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, s) = v.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| s / n as f64)
}

pub fn summarize(plan: &Plan, outcomes: &[Outcome]) -> Summary {
    let mut points = Vec::new();
    for (pi, point) in plan.points.iter().enumerate() {
        for scheme in plan.config.schemes(plan.experiment) {
            let cell: Vec<&Outcome> = outcomes
                .iter()
                .filter(|o| o.job.point == pi && o.job.scheme == scheme)
                .collect();
            let ok: Vec<&SchemeResult> = cell.iter().filter_map(|o| o.result.as_ref().ok()).collect();
            points.push(SummaryPoint {
                scheme,
                grid_value: point.grid_value.is_finite().then_some(point.grid_value),
                alpha: point.alpha,
                delta: point.system.delta.clone(),
                runs: cell.len(),
                failed: cell.len() - ok.len(),
                feasible: ok.iter().filter(|r| r.feasible).count(),
                converged: ok.iter().filter(|r| r.converged).count(),
                mean_min_rate: mean(ok.iter().map(|r| r.min_rate)),
                mean_common_rate_sum: mean(ok.iter().map(|r| r.common_rate_sum)),
                mean_iterations: mean(ok.iter().map(|r| r.iterations as f64)),
                rank_one_fraction: mean(ok.iter().map(|r| if r.rank_one { 1.0 } else { 0.0 })),
            });
        }
    }
    Summary {
        experiment: plan.experiment,
        seed: plan.config.seed,
        n_realizations: plan.jobs.iter().map(|j| j.realization + 1).max().unwrap_or(0),
        failed_runs: outcomes.iter().filter(|o| o.result.is_err()).count(),
        points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> (ExperimentConfig, SystemConfig) {
        let c = ExperimentConfig::parse(text).unwrap();
        let exp = c.experiment.unwrap();
        let s = c.validate(exp).unwrap();
        (c, s)
    }

    #[test]
    fn snr_points_scale_radii() {
        let (c, s) = config(
            r#"{"experiment": "sweep-snr",
                "system": {"M": 2, "K": 2, "L": 500, "epsilon": 1e-5, "P_max": 1, "sigma2": 1, "d": 0.5},
                "grid": [10, 100], "alpha_grid": [0.2, 1.0]}"#,
        );
        let pts = points(Experiment::SweepSnr, &c, &s);
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[3].alpha, Some(1.0));
        assert!((pts[3].system.delta[0] - 0.005).abs() < 1e-15);
        assert_eq!(pts[1].system.p_max, 100.0);
    }

    #[test]
    fn robustness_grid_is_squared_radius() {
        let (c, s) = config(
            r#"{"experiment": "robustness",
                "system": {"M": 2, "K": 2, "L": 500, "epsilon": 1e-5, "P_max": 1, "sigma2": 1},
                "grid": [0, 1e-4]}"#,
        );
        let pts = points(Experiment::Robustness, &c, &s);
        assert!((pts[1].system.delta[1] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn jobs_and_seeds_are_laid_out_by_index() {
        let (c, s) = config(
            r#"{"experiment": "sweep-bler", "n_realizations": 3, "schemes": ["RB-RS-FBL", "RB-NoRS-FBL"],
                "system": {"M": 2, "K": 2, "L": 500, "epsilon": 1e-5, "P_max": 1, "sigma2": 1},
                "grid": [1e-5, 1e-3]}"#,
        );
        let plan = Plan::new(Experiment::SweepBler, c, &s);
        assert_eq!(plan.jobs.len(), 12);
        let j = plan.jobs[4];
        assert_eq!((j.point, j.scheme, j.realization), (0, SchemeId::RbNoRsFbl, 1));
        assert_eq!(plan.channel_seed(1), derive_seed(0, 1));
        assert_ne!(plan.run_seed(&plan.jobs[0]), plan.run_seed(&plan.jobs[6]));
    }
}
