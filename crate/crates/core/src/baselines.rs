//! Comparison methods: the iid multiplier bootstrap (the engine with
//! `chi = 0`) and an asymptotic confidence sequence with a Gaussian-mixture
//! boundary applied to the smoother innovations.

use serde::{Deserialize, Serialize};

use crate::engine::EngineConfig;
use crate::error::{config, domain, Result};
use crate::numerics::Probability;
use crate::smoothers::EffectiveSampleSize;

/// Same configuration with `chi = 0`, so the latent multiplier chain has no
/// persistence.
pub fn iid_engine_config(base: EngineConfig) -> EngineConfig {
    EngineConfig { chi: 0.0, ..base }
}

/// `sqrt( 2 (1 + nu s2 r^2) / (nu^2 r^2) * log( sqrt(1 + nu s2 r^2) / alpha ) )`
pub fn asympcs_halfwidth(nu: f64, sigma2: f64, rho_mix: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha {alpha} outside (0, 1)"));
    }
    if !(nu > 0.0) || !(rho_mix > 0.0) || !(sigma2 >= 0.0) {
        return domain(format!("invalid AsympCS arguments nu={nu}, sigma2={sigma2}, rho={rho_mix}"));
    }
    let r2 = rho_mix * rho_mix;
    let a = 1.0 + nu * sigma2 * r2;
    Ok((2.0 * a / (nu * nu * r2) * (a.sqrt() / alpha).ln()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsympCsConfig {
    pub alpha: Probability,
    pub rho_mix: f64,
    pub nu: EffectiveSampleSize,
    pub variance_eta: f64,
}

impl AsympCsConfig {
    /// `rho_mix = 1/sqrt(nu)`, variance smoothed at rate `eta`.
    pub fn with_defaults(alpha: f64, nu: EffectiveSampleSize, eta: f64) -> Result<Self> {
        Self::new(alpha, 1.0 / nu.get().sqrt(), nu, eta)
    }

    pub fn new(alpha: f64, rho_mix: f64, nu: EffectiveSampleSize, variance_eta: f64) -> Result<Self> {
        let alpha = Probability::new(alpha)?;
        if !(rho_mix > 0.0) || !rho_mix.is_finite() {
            return config(format!("mixture parameter must be positive, got {rho_mix}"));
        }
        if !(variance_eta > 0.0 && variance_eta <= 1.0) {
            return config(format!("variance smoothing rate {variance_eta} outside (0, 1]"));
        }
        Ok(Self { alpha, rho_mix, nu, variance_eta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AsympCsState {
    /// Running variance estimate; starts at zero.
    pub sigma2: f64,
    pub t: u64,
}

impl AsympCsState {
    /// Absorbs `Y_t = x_t - level_prev` and returns the half-width at `t`.
    pub fn step(&mut self, cfg: &AsympCsConfig, x_t: f64, level_prev: f64) -> Result<f64> {
        let y = x_t - level_prev;
        self.sigma2 += cfg.variance_eta * (y * y - self.sigma2);
        self.t += 1;
        asympcs_halfwidth(cfg.nu.get(), self.sigma2, cfg.rho_mix, cfg.alpha.get())
    }
}

pub fn asympcs_step(
    state: AsympCsState,
    cfg: &AsympCsConfig,
    x_t: f64,
    level_prev: f64,
) -> Result<(AsympCsState, f64)> {
    let mut next = state;
    let w = next.step(cfg, x_t, level_prev)?;
    Ok((next, w))
}
