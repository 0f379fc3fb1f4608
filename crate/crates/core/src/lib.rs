//! Exact sampling of threshold-detector Gaussian boson sampling.
//!
//! Modes are measured one at a time. A click turns every branch of the
//! current state into two (the reduced state and the no-click-conditioned
//! state, with opposite-sign weights), so after `m` clicks the mixture holds
//! `2^m` Gaussian branches. Each step costs time and memory linear in the
//! branch count, and the draw is exact up to floating point.
//!
//! Conventions: `ħ = 2`, quadratures interleaved as `(x_0, p_0, x_1, ...)`,
//! vacuum covariance `I`. Mode indices are 0-based.

pub mod encoding;
pub mod error;
pub mod exec;
pub mod gaussian;
pub mod graph;
pub mod mixture;
pub mod oracle;
pub mod resources;
pub mod rng;
pub mod sampler;
pub mod search;
pub mod summation;
pub mod tolerance;

pub use error::{Error, Result};
pub use exec::Parallelism;
pub use gaussian::{GaussianState, C64};
pub use mixture::{StateMixture, StepConfig};
pub use sampler::{ClickPattern, Draw, MeasurementPlan, Sampler};
pub use summation::PrecisionMode;
