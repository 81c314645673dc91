//! Robust beamforming and rate-splitting for short-packet downlink MISO.
//!
//! The crate computes max-min-rate designs for a multi-antenna transmitter
//! serving single-antenna users when
//!
//! * every stream is coded with a finite blocklength, so the achievable rate
//!   carries a dispersion penalty (see [`fbl`]), and
//! * the transmitter only knows each channel up to a norm ball around its
//!   estimate (see [`channels`]).
//!
//! The non-convex design problem is lifted to Hermitian matrices, the
//! ball constraints are turned into linear matrix inequalities, and the
//! remaining difference-of-convex constraints are handled by a
//! convex-concave procedure ([`sdr`], [`algorithms`]). Each iteration is a
//! conic program described by the solver-agnostic IR in [`conic`].
//!
//! Everything that needs the interior-point backend lives behind the
//! default `solver` feature; the rate model, channel sampling, problem
//! construction and the certified bound evaluation in [`schemes`] work
//! without it.

pub mod channels;
pub mod config;
pub mod conic;
pub mod error;
pub mod fbl;
pub mod linalg;
pub mod sdr;
pub mod schemes;

#[cfg(feature = "solver")]
pub mod algorithms;

// Links the system OpenBLAS used by the PSD cone of the backend.
#[cfg(feature = "solver")]
use openblas_src as _;

pub use config::{BeamformerSet, LiftedSolution, SchemeResult, SystemConfig};
pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
