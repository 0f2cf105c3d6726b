//! Modeling toolkit for a gated-oscillator clock and data recovery circuit:
//! jitter densities, statistical BER estimation, oscillator phase-noise
//! budgeting, event-driven behavioral simulation and tolerance analysis.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod jitter;
pub mod phase_noise;
pub mod sim;
pub mod special;
pub mod stat_ber;
pub mod stream;
pub mod tolerance;

pub use error::{Error, Result};
pub use jitter::{JitterSpec, Pdf, Side, UiTime};
pub use sim::{simulate, SimConfig, SimResult};
pub use stat_ber::{ber_estimate, ber_surface, BerSurface, BerTerms, CdrStatConfig};
pub use stream::RunDist;
