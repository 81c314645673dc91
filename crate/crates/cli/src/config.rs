//! Experiment configuration files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use rbrs_core::channels::{correlated_pair, sample_rayleigh, ChannelSet};
use rbrs_core::config::{dbm_to_mw, validate_config};
use rbrs_core::schemes::SchemeId;
use rbrs_core::SystemConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Convergence,
    Robustness,
    SweepBlocklength,
    SweepBler,
    SweepSnr,
    SingleSolve,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Convergence,
        Experiment::Robustness,
        Experiment::SweepBlocklength,
        Experiment::SweepBler,
        Experiment::SweepSnr,
        Experiment::SingleSolve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Convergence => "convergence",
            Experiment::Robustness => "robustness",
            Experiment::SweepBlocklength => "sweep-blocklength",
            Experiment::SweepBler => "sweep-bler",
            Experiment::SweepSnr => "sweep-snr",
            Experiment::SingleSolve => "single-solve",
        }
    }

    /// Whether the experiment needs a nonempty `grid`.
    pub fn is_sweep(self) -> bool {
        matches!(
            self,
            Experiment::Robustness | Experiment::SweepBlocklength | Experiment::SweepBler | Experiment::SweepSnr
        )
    }

    pub fn default_schemes(self) -> Vec<SchemeId> {
        match self {
            Experiment::Convergence | Experiment::SingleSolve => vec![SchemeId::RbRsFbl],
            Experiment::Robustness => vec![SchemeId::RbRsFbl, SchemeId::NoRbRsFbl],
            _ => SchemeId::ALL.to_vec(),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment {s:?}"))
    }
}

/// A per-user quantity written either once for every user or as a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerUser {
    Same(f64),
    Each(Vec<f64>),
}

impl PerUser {
    fn expand(&self, users: usize) -> Vec<f64> {
        match self {
            PerUser::Same(v) => vec![*v; users],
            PerUser::Each(v) => v.clone(),
        }
    }
}

/// System parameters as written in a config file. Noise may be given
/// in linear mW (`sigma2`) or in dBm (`sigma2_dbm`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(rename = "M")]
    pub antennas: usize,
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "L")]
    pub blocklength: u64,
    pub epsilon: PerUser,
    #[serde(rename = "P_max")]
    pub p_max: f64,
    #[serde(default)]
    pub sigma2: Option<PerUser>,
    #[serde(default)]
    pub sigma2_dbm: Option<PerUser>,
    #[serde(default = "zero")]
    pub delta: PerUser,
    #[serde(default = "zero")]
    pub alpha: PerUser,
    #[serde(default)]
    pub d: f64,
}

fn zero() -> PerUser {
    PerUser::Same(0.0)
}

impl SystemSpec {
    pub fn to_system(&self) -> Result<SystemConfig, ConfigError> {
        let k = self.users;
        let sigma2 = match (&self.sigma2, &self.sigma2_dbm) {
            (Some(s), None) => s.expand(k),
            (None, Some(s)) => s.expand(k).into_iter().map(dbm_to_mw).collect(),
            (None, None) => return Err(ConfigError::field("system.sigma2", "missing noise power")),
            (Some(_), Some(_)) => {
                return Err(ConfigError::field("system.sigma2", "give sigma2 or sigma2_dbm, not both"))
            }
        };
        let cfg = SystemConfig {
            antennas: self.antennas,
            users: k,
            blocklength: self.blocklength,
            epsilon: self.epsilon.expand(k),
            p_max: self.p_max,
            sigma2,
            delta: self.delta.expand(k),
            alpha: self.alpha.expand(k),
            d: self.d,
        };
        validate_config(cfg).map_err(ConfigError::from_core)
    }
}

/// Where the channel estimates come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelSpec {
    /// I.i.d. `CN(0, 1)` entries, one draw per realization.
    Rayleigh,
    /// The fixed two-user uniform-linear-array pair.
    CorrelatedPair { gamma: f64, theta: f64 },
    /// A `ChannelSet` JSON file; radii are replaced by the configured ones.
    File { path: PathBuf },
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec::Rayleigh
    }
}

impl ChannelSpec {
    /// Estimates of realization `seed`; the radii are set by the caller.
    pub fn estimates(&self, cfg: &SystemConfig, seed: u64, base: &Path) -> Result<ChannelSet, String> {
        match self {
            ChannelSpec::Rayleigh => Ok(sample_rayleigh(cfg.antennas, cfg.users, seed)),
            ChannelSpec::CorrelatedPair { gamma, theta } => {
                if cfg.users != 2 {
                    return Err(format!("the correlated pair has 2 users, config has K = {}", cfg.users));
                }
                correlated_pair(cfg.antennas, *gamma, *theta, 0.0).map_err(|e| e.to_string())
            }
            ChannelSpec::File { path } => {
                let path = if path.is_relative() { base.join(path) } else { path.clone() };
                let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                let ch = ChannelSet::from_json(&text).map_err(|e| e.to_string())?;
                if ch.m != cfg.antennas || ch.k != cfg.users {
                    return Err(format!(
                        "channel file has M = {}, K = {}; config has M = {}, K = {}",
                        ch.m, ch.k, cfg.antennas, cfg.users
                    ));
                }
                Ok(ch)
            }
        }
    }
}

fn default_realizations() -> usize {
    20
}

fn one() -> usize {
    1
}

/// An experiment file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    pub system: SystemSpec,
    /// Values of the swept axis: delta (convergence), delta^2
    /// (robustness), L, epsilon, or P_max in mW (sweep-snr).
    #[serde(default)]
    pub grid: Vec<f64>,
    /// CSIT exponents for sweep-snr; defaults to `system.alpha`.
    #[serde(default)]
    pub alpha_grid: Vec<f64>,
    #[serde(default)]
    pub schemes: Vec<SchemeId>,
    #[serde(default)]
    pub channel: ChannelSpec,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    #[serde(default = "one")]
    pub n_starts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Outer-loop tolerance and iteration cap.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
}

/// A config problem, reported with a location when one is known.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub location: String,
    pub message: String,
}

impl ConfigError {
    pub fn field(field: &str, message: impl Into<String>) -> Self {
        Self {
            location: format!("field `{field}`"),
            message: message.into(),
        }
    }

    fn from_core(e: rbrs_core::Error) -> Self {
        match e {
            rbrs_core::Error::Config { field, reason } => Self::field(&format!("system.{field}"), reason),
            other => Self::field("system", other.to_string()),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl ExperimentConfig {
    /// Parses JSON text; syntax and type errors carry line and column.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            location: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Checks every field for `experiment` and returns the system config.
    pub fn validate(&self, experiment: Experiment) -> Result<SystemConfig, ConfigError> {
        if let Some(e) = self.experiment {
            if e != experiment {
                return Err(ConfigError::field(
                    "experiment",
                    format!("config is for {e}, subcommand is {experiment}"),
                ));
            }
        }
        let cfg = self.system.to_system()?;
        if experiment.is_sweep() && self.grid.is_empty() {
            return Err(ConfigError::field("grid", format!("{experiment} needs a nonempty grid")));
        }
        if self.n_realizations < 1 {
            return Err(ConfigError::field("n_realizations", "need at least one realization"));
        }
        if self.n_starts < 1 {
            return Err(ConfigError::field("n_starts", "need at least one start"));
        }
        if let Some(&v) = self.grid.iter().find(|v| !v.is_finite()) {
            return Err(ConfigError::field("grid", format!("non-finite value {v}")));
        }
        let bad_grid = |reason: &str| Err(ConfigError::field("grid", reason.to_string()));
        match experiment {
            Experiment::Convergence | Experiment::Robustness if self.grid.iter().any(|&v| v < 0.0) => {
                return bad_grid("negative radius");
            }
            Experiment::SweepBlocklength if self.grid.iter().any(|&v| v < 1.0 || v.fract() != 0.0) => {
                return bad_grid("blocklengths must be positive integers");
            }
            Experiment::SweepBler if self.grid.iter().any(|&v| !(v > 0.0 && v < 0.5)) => {
                return bad_grid("epsilon out of range (0, 0.5)");
            }
            Experiment::SweepSnr if self.grid.iter().any(|&v| v <= 0.0) => {
                return bad_grid("powers must be positive");
            }
            _ => {}
        }
        if self.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(ConfigError::field("alpha_grid", "alpha must lie in [0, 1]"));
        }
        if experiment == Experiment::SingleSolve && self.schemes.len() > 1 {
            return Err(ConfigError::field("schemes", "single-solve takes one scheme"));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(ConfigError::field("tol", "tolerance must be positive"));
            }
        }
        if self.max_iters == Some(0) {
            return Err(ConfigError::field("max_iters", "need at least one iteration"));
        }
        if let ChannelSpec::CorrelatedPair { .. } = self.channel {
            if cfg.antennas != 4 || cfg.users != 2 {
                return Err(ConfigError::field("channel", "the correlated pair needs M = 4 and K = 2"));
            }
        }
        Ok(cfg)
    }

    pub fn schemes(&self, experiment: Experiment) -> Vec<SchemeId> {
        if self.schemes.is_empty() {
            experiment.default_schemes()
        } else {
            self.schemes.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "system": {"M": 4, "K": 2, "L": 1000, "epsilon": 1e-5, "P_max": 1000, "sigma2": 0.01, "delta": 0.005},
        "grid": [0.005, 0.01]
    }"#;

    #[test]
    fn scalars_expand_per_user() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        let cfg = c.validate(Experiment::Convergence).unwrap();
        assert_eq!(cfg.epsilon, vec![1e-5; 2]);
        assert_eq!(cfg.delta, vec![0.005; 2]);
        assert_eq!(c.n_realizations, 20);
        assert_eq!(c.channel, ChannelSpec::Rayleigh);
    }

    #[test]
    fn dbm_noise_is_converted() {
        let text = MINIMAL.replace("\"sigma2\": 0.01", "\"sigma2_dbm\": -20");
        let cfg = ExperimentConfig::parse(&text).unwrap().validate(Experiment::Convergence).unwrap();
        assert!((cfg.sigma2[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn syntax_errors_have_a_line() {
        let err = ExperimentConfig::parse("{\n  \"system\": [1,\n}").unwrap_err();
        assert!(err.location.starts_with("line 3"), "{err}");
    }

    #[test]
    fn invariant_errors_name_the_field() {
        let text = MINIMAL.replace("1e-5", "0.6");
        let err = ExperimentConfig::parse(&text).unwrap().validate(Experiment::Convergence).unwrap_err();
        assert_eq!(err.location, "field `system.epsilon`");
        assert!(err.message.contains("epsilon out of range"));
    }

    #[test]
    fn sweeps_need_a_grid() {
        let text = MINIMAL.replace("[0.005, 0.01]", "[]");
        let c = ExperimentConfig::parse(&text).unwrap();
        assert!(c.validate(Experiment::Convergence).is_ok());
        assert_eq!(c.validate(Experiment::SweepBler).unwrap_err().location, "field `grid`");
    }

    #[test]
    fn experiment_must_match_subcommand() {
        let text = MINIMAL.replacen('{', "{\"experiment\": \"sweep-bler\",", 1);
        let c = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(c.validate(Experiment::Convergence).unwrap_err().location, "field `experiment`");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replacen('{', "{\"gird\": [1],", 1);
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn names_roundtrip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
    }

    #[test]
    fn shipped_configs_validate() {
        for text in [
            include_str!("../configs/convergence.json"),
            include_str!("../configs/robustness.json"),
            include_str!("../configs/sweep-blocklength.json"),
            include_str!("../configs/sweep-snr.json"),
        ] {
            let c = ExperimentConfig::parse(text).unwrap();
            c.validate(c.experiment.unwrap()).unwrap();
        }
    }
}
