//! Incremental descent for finite sums with without-replacement sampling.
//!
//! The crate is organised around the epoch recursion
//!
//! ```text
//! z_{K,0} = x_K
//! z_{K,i} = z_{K,i-1} - alpha_{K,i} d_{pi_K(i)}(zhat_{K,i-1}),   zhat_{K,i-1} in conv(z_{K,0..i-1})
//! x_{K+1} = z_{K,n}
//! ```
//!
//! * [`oracles`] holds the finite-sum problems and their direction oracles.
//! * [`steps`] holds the step-size rules (constant, decreasing, cube-root adaptive).
//! * [`schedules`] chooses evaluation points and per-epoch orderings.
//! * [`engine`] runs the recursion and records full traces.
//! * [`analysis`] certifies inequalities and bounds on recorded traces and builds
//!   the continuous-time interpolant diagnostics.
//! * [`traceio`] reads and writes traces and reports.

pub mod analysis;
pub mod engine;
mod error;
pub mod linalg;
pub mod oracles;
pub mod schedules;
pub mod steps;
pub mod traceio;

pub use error::{Error, Result};
