use thiserror::Error;

use crate::conic::SolveStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A configuration field violates its invariant. `field` names the field.
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("argument outside the domain of {function}: {value}")]
    Domain { function: &'static str, value: f64 },

    #[error("series did not settle within {terms} terms (last |term| = {last_term:e})")]
    SeriesNotConverged { terms: usize, last_term: f64 },

    #[error("channel model: {0}")]
    Channel(String),

    /// Linearization point where the tangent is undefined or would overflow.
    #[error("degenerate expansion point for {function}: {value}")]
    DegenerateExpansion { function: &'static str, value: f64 },

    #[error("malformed conic problem: {0}")]
    MalformedProblem(String),

    #[error("solver returned {status:?}: {detail}")]
    Solver { status: SolveStatus, detail: String },

    /// The signal bound |h^H w| - delta |w| is not positive, so the log
    /// initialization of the auxiliary variables is undefined.
    #[error("degenerate worst-case signal for user {user} ({stream})")]
    DegenerateSignal { user: usize, stream: &'static str },

    #[error("no feasible starting point after {attempts} attempts: {detail}")]
    InfeasibleStart { attempts: usize, detail: String },
}
