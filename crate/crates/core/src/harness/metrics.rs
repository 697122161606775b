//! Aggregate metrics and the differencing transform used for jump tests.

use std::ops::RangeInclusive;

use crate::error::{domain, Result};

/// Fraction of replications whose band never missed.
pub fn uniform_coverage(exceed_flags: &[bool]) -> Result<f64> {
    if exceed_flags.is_empty() {
        return domain("coverage of an empty set of replications");
    }
    let hits = exceed_flags.iter().filter(|&&e| !e).count();
    Ok(hits as f64 / exceed_flags.len() as f64)
}

/// Binomial standard error of a coverage estimate.
pub fn mc_stderr(coverage: f64, replications: usize) -> f64 {
    (coverage * (1.0 - coverage) / replications as f64).sqrt()
}

/// For each `t` in `horizon`, the fraction of replications that rejected at
/// or before `t`.
pub fn power_curve(first_reject_times: &[Option<u64>], horizon: RangeInclusive<u64>) -> Result<Vec<(u64, f64)>> {
    if first_reject_times.is_empty() {
        return domain("power of an empty set of replications");
    }
    let n = first_reject_times.len() as f64;
    let mut times: Vec<u64> = first_reject_times.iter().flatten().copied().collect();
    times.sort_unstable();
    let mut k = 0;
    Ok(horizon
        .map(|t| {
            while k < times.len() && times[k] <= t {
                k += 1;
            }
            (t, k as f64 / n)
        })
        .collect())
}

/// `x_t - x_{t-h}` for `t = h+1..n`; element 0 corresponds to time `h+1`.
pub fn jump_transform(x: &[f64], h: usize) -> Result<Vec<f64>> {
    if h == 0 || h >= x.len() {
        return domain(format!("lag {h} needs 1 <= h < {}", x.len()));
    }
    Ok(x[h..].iter().zip(x).map(|(a, b)| a - b).collect())
}
