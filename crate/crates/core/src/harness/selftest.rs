//! Quick oracle checks runnable from the command line.

use crate::baselines::asympcs_halfwidth;
use crate::engine::{bootstrap_delta_direct, Replicate};
use crate::multipliers::{transform_t, persistence};
use crate::numerics::{std_normal_cdf, std_normal_quantile, unit_variance_t_quantile, DegreesOfFreedom};
use crate::numerics::rng::substream;
use crate::smoothers::{effective_sample_size, SmootherParams};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn close(name: &'static str, got: Result<f64>, want: f64, tol: f64) -> Check {
    match got {
        Ok(v) => Check { name, passed: (v - want).abs() <= tol, detail: format!("got {v:.15e}, want {want:.15e}") },
        Err(e) => Check { name, passed: false, detail: e.to_string() },
    }
}

fn online_vs_direct() -> Result<f64> {
    let params = SmootherParams::brown(0.07)?;
    let mut rng = substream(99, 0);
    let mut rep = Replicate::new(params, substream(1, 0))?;
    let mut main = crate::smoothers::Smoother::new(params)?;
    let (mut v, mut x, mut lagged) = (Vec::new(), Vec::new(), Vec::new());
    let mut worst: f64 = 0.0;
    for t in 1..=120u64 {
        let vi: f64 = rand::Rng::random_range(&mut rng, -2.0..2.0);
        let xi: f64 = rand::Rng::random_range(&mut rng, -5.0..5.0);
        lagged.push(main.level());
        let online = rep.absorb(vi, xi - main.level());
        main.update(xi)?;
        v.push(vi);
        x.push(xi);
        let direct = bootstrap_delta_direct(&params, &v, &x, &lagged, t)?;
        worst = worst.max((online - direct).abs());
    }
    Ok(worst)
}

/// Runs all checks; the caller decides how to report them.
pub fn run_selftest() -> Vec<Check> {
    let dof4 = DegreesOfFreedom::new(4.0).expect("valid");
    vec![
        close("normal cdf", std_normal_cdf(1.959963985), 0.97500000002688156, 1e-15),
        close("normal quantile", std_normal_quantile(0.975), 1.959963984540054, 1e-14),
        close("unit-variance t quantile", unit_variance_t_quantile(0.975, dof4), 1.9632431614775577, 1e-12),
        close("transform T", transform_t(1.959964, dof4), 1.9632431864537614, 1e-12),
        close("persistence", persistence(8.0, 1.0 / 3.0), 0.5, 1e-15),
        close("ewma effective size", SmootherParams::ewma(0.1).and_then(|p| effective_sample_size(&p)).map(|n| n.get()), 19.0, 1e-12),
        close("asympcs halfwidth", asympcs_halfwidth(100.0, 1.0, 0.1, 0.1), 0.3255247261437458, 1e-12),
        close("online vs direct bootstrap", online_vs_direct(), 0.0, 1e-9),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_selftest() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
