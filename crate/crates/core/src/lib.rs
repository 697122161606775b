//! Online bootstrap confidence bands and sequential tests for exponentially
//! smoothed trends of nonstationary time series.
//!
//! The [`engine`] consumes one observation at a time with O(B) memory, where
//! B is the number of bootstrap replicates. Each replicate re-smooths the
//! lagged residuals `V_t (X_t - level_{t-1})` under AR(1) multipliers; one
//! group of replicates estimates the standard error of the smoother and the
//! other calibrates a uniform-in-time critical value on a doubling block
//! schedule.
//!
//! The remaining modules provide the smoothers, the multiplier stream, a
//! simulator for AR(1) series with trend, seasonality and shocks, two
//! comparison methods, and a Monte Carlo harness.

pub mod baselines;
pub mod dgp;
pub mod engine;
pub mod error;
pub mod harness;
pub mod multipliers;
pub mod numerics;
pub mod smoothers;

pub use error::{Error, Result};
