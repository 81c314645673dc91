//! The four compared designs, certified evaluation, and Monte-Carlo runs.
//!
//! | id            | rate splitting | robust | rate model |
//! |---------------|----------------|--------|------------|
//! | `RB-RS-FBL`   | yes            | yes    | finite     |
//! | `RB-NoRS-FBL` | no             | yes    | finite     |
//! | `NoRB-RS-FBL` | yes            | no     | finite     |
//! | `RB-RS-IFBL`  | yes            | yes    | Shannon    |
//!
//! The non-robust design is computed for a zero radius and then judged
//! under the true radius.

pub mod bounds;

#[cfg(feature = "solver")]
mod runner;

#[cfg(feature = "solver")]
pub use runner::{feasibility_count, run_realizations, run_scheme, FeasibilityCount};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::sdr::Formulation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeId {
    #[serde(rename = "RB-RS-FBL")]
    RbRsFbl,
    #[serde(rename = "RB-NoRS-FBL")]
    RbNoRsFbl,
    #[serde(rename = "NoRB-RS-FBL")]
    NoRbRsFbl,
    #[serde(rename = "RB-RS-IFBL")]
    RbRsIfbl,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [
        SchemeId::RbRsFbl,
        SchemeId::RbNoRsFbl,
        SchemeId::NoRbRsFbl,
        SchemeId::RbRsIfbl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::RbRsFbl => "RB-RS-FBL",
            SchemeId::RbNoRsFbl => "RB-NoRS-FBL",
            SchemeId::NoRbRsFbl => "NoRB-RS-FBL",
            SchemeId::RbRsIfbl => "RB-RS-IFBL",
        }
    }

    pub fn rate_splitting(self) -> bool {
        self != SchemeId::RbNoRsFbl
    }

    pub fn robust(self) -> bool {
        self != SchemeId::NoRbRsFbl
    }

    /// Rate model the scheme designs for and is scored with.
    pub fn formulation(self, cfg: &SystemConfig) -> Result<Formulation> {
        match self {
            SchemeId::RbRsIfbl => Ok(Formulation::ifbl(cfg.users, true)),
            id => Formulation::fbl(cfg, id.rate_splitting()),
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config {
                field: "scheme",
                reason: format!("unknown scheme {s:?}"),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for id in SchemeId::ALL {
            assert_eq!(id.name().parse::<SchemeId>().unwrap(), id);
            let json = serde_json::to_string(&id).unwrap();
            assert_eq!(json, format!("\"{}\"", id.name()));
            assert_eq!(serde_json::from_str::<SchemeId>(&json).unwrap(), id);
        }
        assert!("RB".parse::<SchemeId>().is_err());
    }

    #[test]
    fn ifbl_has_no_penalty() {
        let cfg = SystemConfig::uniform(2, 2, 100, 1e-3, 1.0, 1.0, 0.0);
        let f = SchemeId::RbRsIfbl.formulation(&cfg).unwrap();
        assert!(f.d_common.iter().chain(&f.d_private).all(|&d| d == 0.0));
        let f = SchemeId::RbNoRsFbl.formulation(&cfg).unwrap();
        assert!(!f.rate_splitting && f.d_private[0] > 0.0);
    }
}
