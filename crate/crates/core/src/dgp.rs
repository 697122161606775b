//! Simulator for AR(1) noise around a mean with linear trend, sinusoidal
//! seasonality and compound Gaussian level shocks.
//!
//! `m_i = mu + a i + A sin(2 pi i / P + psi) + L_i`, `L_i = L_{i-1} + B_i J_i`,
//! and `X_i = m_i + phi (X_{i-1} - m_{i-1}) + sigma z_i` with `X_0 - m_0 = 0`.
//! Innovations and shocks use separate streams, so switching shocks on or
//! off leaves the noise path unchanged. Student-t innovations are obtained
//! from the same normal draws by the inverse-CDF map, so Gaussian and
//! heavy-tailed series under one seed are comonotone.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::multipliers::Transform;
use crate::numerics::DegreesOfFreedom;
use crate::numerics::rng::substream;
use crate::smoothers::{Smoother, SmootherParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Innovation {
    #[default]
    Gaussian,
    /// Student-t scaled to unit variance; needs `df > 2`.
    StandardizedT { df: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpParams {
    pub mu: f64,
    /// Trend slope.
    pub a: f64,
    /// Seasonal amplitude.
    #[serde(rename = "amplitude")]
    pub amp: f64,
    /// Seasonal period.
    pub period: f64,
    /// Seasonal phase.
    pub psi: f64,
    /// Shock probability per step.
    pub p: f64,
    pub sigma_j: f64,
    pub phi: f64,
    pub sigma: f64,
    #[serde(default)]
    pub innovation: Innovation,
}

/// Named regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpPreset {
    Stationary,
    TrendSeasonal,
    TrendShocks,
}

impl DgpPreset {
    pub fn name(self) -> &'static str {
        match self {
            Self::Stationary => "stationary",
            Self::TrendSeasonal => "trend_seasonal",
            Self::TrendShocks => "trend_shocks",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "stationary" => Ok(Self::Stationary),
            "trend_seasonal" => Ok(Self::TrendSeasonal),
            "trend_shocks" => Ok(Self::TrendShocks),
            other => config(format!("unknown DGP preset {other:?}")),
        }
    }
}

/// AR coefficients used by the main experiments.
pub const MAIN_PHIS: [f64; 2] = [0.3, 0.6];
/// AR coefficient of the hyperparameter ablations.
pub const ABLATION_PHI: f64 = 0.5;

impl DgpParams {
    pub fn preset(preset: DgpPreset, phi: f64) -> Self {
        let base = Self {
            mu: 0.0,
            a: 0.0,
            amp: 0.0,
            period: 400.0,
            psi: 0.0,
            p: 0.0,
            sigma_j: 0.0,
            phi,
            sigma: 1.0,
            innovation: Innovation::Gaussian,
        };
        match preset {
            DgpPreset::Stationary => base,
            DgpPreset::TrendSeasonal => Self { a: 1e-3, amp: 0.4, ..base },
            DgpPreset::TrendShocks => Self { a: 1e-3, p: 0.005, sigma_j: 2.0, ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.phi.abs() < 1.0) {
            return config(format!("AR coefficient {} must satisfy |phi| < 1", self.phi));
        }
        if !(self.period > 0.0) {
            return config("seasonal period must be positive");
        }
        if !(0.0..=1.0).contains(&self.p) {
            return config(format!("shock probability {} outside [0, 1]", self.p));
        }
        if self.amp < 0.0 || self.sigma_j < 0.0 || self.sigma < 0.0 {
            return config("amplitude and scales must be nonnegative");
        }
        if let Innovation::StandardizedT { df } = self.innovation {
            if !(df > 2.0) {
                return config(format!("standardized t innovations need df > 2, got {df}"));
            }
        }
        let finite = [self.mu, self.a, self.amp, self.period, self.psi, self.sigma_j, self.sigma];
        if finite.iter().any(|v| !v.is_finite()) {
            return config("DGP parameters must be finite");
        }
        Ok(())
    }

    /// Deterministic part `mu + a i + A sin(2 pi i / P + psi)` of the mean.
    pub fn deterministic_mean(&self, i: u64) -> f64 {
        let i = i as f64;
        self.mu + self.a * i + self.amp * (2.0 * PI * i / self.period + self.psi).sin()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    /// Observations `X_1..X_n`.
    pub x: Vec<f64>,
    /// Instantaneous means `m_1..m_n`.
    pub m: Vec<f64>,
}

pub fn simulate(params: &DgpParams, n: usize, seed: u64) -> Result<SimOutput> {
    params.validate()?;
    let mut noise = substream(seed, 0);
    let mut shocks = substream(seed, 1);
    let student = match params.innovation {
        Innovation::StandardizedT { df } => Some(Transform::student_t(DegreesOfFreedom::new(df)?)),
        Innovation::Gaussian => None,
    };
    let mut x = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    let mut shock_level = 0.0;
    let mut dev = 0.0;
    for i in 1..=n as u64 {
        let hit = shocks.random::<f64>() < params.p;
        let jump: f64 = shocks.sample::<f64, _>(StandardNormal) * params.sigma_j;
        if hit {
            shock_level += jump;
        }
        let g: f64 = noise.sample(StandardNormal);
        let z = match &student {
            Some(tr) => tr.apply(g),
            None => g,
        };
        dev = params.phi * dev + params.sigma * z;
        let mean = params.deterministic_mean(i) + shock_level;
        m.push(mean);
        x.push(mean + dev);
    }
    Ok(SimOutput { x, m })
}

/// Smoothed target `mu_eta(t) = sum_i w_t(i) m_i`, obtained by running the
/// (linear) smoother recursion on the mean sequence.
pub fn true_smoothed_mean(params: &SmootherParams, m: &[f64]) -> Result<Vec<f64>> {
    let mut sm = Smoother::new(*params)?;
    m.iter().map(|&v| sm.update(v)).collect()
}

/// Writes `t,x,m` records with a header row.
pub fn write_series_csv<W: Write>(mut out: W, sim: &SimOutput) -> Result<()> {
    writeln!(out, "t,x,m")?;
    for (k, (x, m)) in sim.x.iter().zip(&sim.m).enumerate() {
        writeln!(out, "{},{},{}", k + 1, x, m)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothers::weight;

    fn lag1_autocorr(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let cov: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        cov / var
    }

    fn variance(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn noiseless_series_is_constant() {
        let p = DgpParams { mu: 1.5, sigma: 0.0, ..DgpParams::preset(DgpPreset::Stationary, 0.0) };
        let sim = simulate(&p, 100, 1).unwrap();
        assert!(sim.x.iter().chain(&sim.m).all(|&v| v == 1.5));
    }

    #[test]
    fn stationary_autocorrelation() {
        let p = DgpParams::preset(DgpPreset::Stationary, 0.3);
        let sim = simulate(&p, 100_000, 11).unwrap();
        assert!((lag1_autocorr(&sim.x) - 0.3).abs() < 0.03);
    }

    #[test]
    fn trend_seasonal_mean_is_exact() {
        let p = DgpParams::preset(DgpPreset::TrendSeasonal, 0.3);
        assert_eq!((p.a, p.amp, p.period, p.psi, p.p), (1e-3, 0.4, 400.0, 0.0, 0.0));
        let sim = simulate(&p, 2000, 5).unwrap();
        for (k, &m) in sim.m.iter().enumerate() {
            let i = (k + 1) as f64;
            assert_eq!(m, 1e-3 * i + 0.4 * (2.0 * PI * i / 400.0).sin());
        }
    }

    #[test]
    fn shocks_accumulate() {
        let p = DgpParams::preset(DgpPreset::TrendShocks, 0.6);
        assert_eq!((p.p, p.sigma_j, p.a, p.amp), (0.005, 2.0, 1e-3, 0.0));
        let sim = simulate(&p, 5000, 2).unwrap();
        let levels: Vec<f64> = sim.m.iter().enumerate().map(|(k, m)| m - 1e-3 * (k + 1) as f64).collect();
        let jumps = levels.windows(2).filter(|w| (w[1] - w[0]).abs() > 1e-9).count();
        // about 25 expected
        assert!((8..=50).contains(&jumps), "{jumps} jumps");
    }

    #[test]
    fn variance_targets() {
        for phi in [0.3, 0.6] {
            let p = DgpParams::preset(DgpPreset::Stationary, phi);
            let sim = simulate(&p, 1_000_000, 3).unwrap();
            let want = 1.0 / (1.0 - phi * phi);
            assert!((variance(&sim.x) / want - 1.0).abs() < 0.03);
        }
        let p = DgpParams {
            innovation: Innovation::StandardizedT { df: 6.0 },
            sigma: 2.0,
            ..DgpParams::preset(DgpPreset::Stationary, 0.0)
        };
        let sim = simulate(&p, 1_000_000, 4).unwrap();
        assert!((variance(&sim.x) / 4.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn heavy_tailed_innovations_are_comonotone() {
        let g = DgpParams::preset(DgpPreset::Stationary, 0.0);
        let t = DgpParams { innovation: Innovation::StandardizedT { df: 6.0 }, ..g };
        let (a, b) = (simulate(&g, 500, 6).unwrap(), simulate(&t, 500, 6).unwrap());
        let mut pairs: Vec<(f64, f64)> = a.x.iter().copied().zip(b.x.iter().copied()).collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        assert!(pairs.windows(2).all(|w| w[1].1 > w[0].1));
        let kurt = |x: &[f64]| {
            let v = variance(x);
            x.iter().map(|y| y.powi(4)).sum::<f64>() / x.len() as f64 / (v * v)
        };
        let big = simulate(&DgpParams { sigma: 1.0, ..t }, 400_000, 1).unwrap();
        // excess kurtosis of t_6 is 3
        assert!((kurt(&big.x) - 6.0).abs() < 1.0);
    }

    #[test]
    fn seeds_reproduce() {
        let p = DgpParams::preset(DgpPreset::TrendShocks, 0.3);
        assert_eq!(simulate(&p, 300, 9).unwrap(), simulate(&p, 300, 9).unwrap());
        assert_ne!(simulate(&p, 300, 9).unwrap(), simulate(&p, 300, 10).unwrap());
    }

    #[test]
    fn rejects_explosive_ar() {
        for phi in [1.0, -1.0, 1.5] {
            let p = DgpParams::preset(DgpPreset::Stationary, phi);
            assert!(simulate(&p, 10, 0).is_err());
        }
        let p = DgpParams { innovation: Innovation::StandardizedT { df: 2.0 }, ..DgpParams::preset(DgpPreset::Stationary, 0.1) };
        assert!(simulate(&p, 10, 0).is_err());
    }

    #[test]
    fn smoothed_mean_examples() {
        let eta = 0.1;
        let p = SmootherParams::ewma(eta).unwrap();
        let mu = true_smoothed_mean(&p, &[2.0; 30]).unwrap();
        for (k, v) in mu.iter().enumerate() {
            let want = 2.0 * (1.0 - (1.0f64 - eta).powi(k as i32 + 1));
            assert!((v - want).abs() < 1e-12);
        }
        let sim = simulate(&DgpParams::preset(DgpPreset::TrendShocks, 0.3), 50, 8).unwrap();
        let mu = true_smoothed_mean(&p, &sim.m).unwrap();
        let direct: f64 = (1..=50).map(|i| weight(&p, 50, i).unwrap() * sim.m[i as usize - 1]).sum();
        assert!((mu[49] - direct).abs() < 1e-10);
        let mut sm = Smoother::new(p).unwrap();
        let est: Vec<f64> = sim.x.iter().map(|&x| sm.update(x).unwrap()).collect();
        assert_eq!(true_smoothed_mean(&p, &sim.x).unwrap(), est);
    }

    #[test]
    fn csv_layout() {
        let sim = SimOutput { x: vec![1.0, 2.5], m: vec![0.0, 0.5] };
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &sim).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x,m\n1,1,0\n2,2.5,0.5\n");
    }
}
