//! The online bootstrap engine.
//!
//! Per time step every replicate draws a fresh innovation, advances its
//! latent AR(1) chain, multiplies the lagged residual `X_t - level_{t-1}` by
//! the transformed multiplier and feeds the product to its own copy of the
//! smoother. The first `b1` replicates give the standard error; the other
//! `b2` track running maxima of their standardized values, and at each block
//! boundary `t0 + 2^k (t1 - t0)` the critical value is refreshed as the
//! `(1 - alpha / K)` empirical quantile of those maxima.

mod decision;
mod snapshot;

pub use decision::{run_test, Decision, SequentialTest, Side};
pub use snapshot::{EngineSnapshot, SNAPSHOT_FORMAT, SNAPSHOT_VERSION};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::multipliers::{MultiplierConfig, MultiplierState, Transform, TransformKind, DEFAULT_CHI};
use crate::numerics::rng::substream;
use crate::smoothers::{effective_sample_size, weight, EffectiveSampleSize, Smoother, SmootherParams};

/// Lower bound applied to the standard error before dividing by it.
const SIGMA_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub smoother: SmootherParams,
    /// Target miscoverage.
    pub alpha: f64,
    /// Burn-in length.
    pub t0: u64,
    /// End of the first calibration period.
    pub t1: u64,
    /// Last monitored time.
    pub t2: u64,
    /// Replicates used for the standard error.
    pub b1: usize,
    /// Replicates used for calibration.
    pub b2: usize,
    pub chi: f64,
    pub seed: u64,
    #[serde(default)]
    pub transform: TransformKind,
    /// Explicit effective sample size. Required for Holt-Winters, which has
    /// no closed-form weights; otherwise derived from the smoother.
    #[serde(default)]
    pub nu: Option<f64>,
}

impl EngineConfig {
    /// Configuration with `chi = 1/3`, seed 0 and the Student-t transform.
    pub fn new(smoother: SmootherParams, alpha: f64, t0: u64, t1: u64, t2: u64, b1: usize, b2: usize) -> Self {
        Self {
            smoother,
            alpha,
            t0,
            t1,
            t2,
            b1,
            b2,
            chi: DEFAULT_CHI,
            seed: 0,
            transform: TransformKind::StudentT,
            nu: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_chi(mut self, chi: f64) -> Self {
        self.chi = chi;
        self
    }

    pub fn with_transform(mut self, transform: TransformKind) -> Self {
        self.transform = transform;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.smoother.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return config(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        if !(self.t0 < self.t1 && self.t1 < self.t2) {
            return config(format!(
                "need t0 < t1 < t2, got t0 = {}, t1 = {}, t2 = {}",
                self.t0, self.t1, self.t2
            ));
        }
        if self.b1 < 2 {
            return config("b1 must be at least 2 to form a variance");
        }
        if self.b2 < 1 {
            return config("b2 must be at least 1");
        }
        if !(self.chi >= 0.0 && self.chi.is_finite()) {
            return config(format!("chi = {} must be >= 0", self.chi));
        }
        if let Some(nu) = self.nu {
            if !(nu > 0.0 && nu.is_finite()) {
                return config(format!("nu = {nu} must be positive"));
            }
        }
        Ok(())
    }

    pub fn replicates(&self) -> usize {
        self.b1 + self.b2
    }

    pub fn effective_sample_size(&self) -> Result<EffectiveSampleSize> {
        match self.nu {
            Some(nu) => EffectiveSampleSize::new(nu),
            None => effective_sample_size(&self.smoother).map_err(|e| match e {
                Error::Unsupported(msg) => {
                    Error::Config(format!("{msg}; set nu explicitly for this smoother"))
                }
                other => other,
            }),
        }
    }

    /// Number of calibration blocks `K = ceil(log2((t2 - t0) / (t1 - t0)))`.
    pub fn num_blocks(&self) -> u32 {
        let span = u128::from(self.t2 - self.t0);
        let mut len = u128::from(self.t1 - self.t0);
        let mut k = 0;
        while len < span {
            len *= 2;
            k += 1;
        }
        k
    }

    /// 1-based order statistic used as the critical value,
    /// `ceil(b2 (1 - alpha / K))` clamped to `[1, b2]`.
    pub fn quantile_rank(&self) -> usize {
        let level = 1.0 - self.alpha / self.num_blocks() as f64;
        let raw = (self.b2 as f64 * level - 1e-9).ceil();
        (raw.max(1.0) as usize).min(self.b2)
    }

    /// Block boundary `t0 + 2^k (t1 - t0)` for block index `k`.
    pub fn boundary(&self, k: u32) -> Option<u64> {
        if k >= 64 {
            return None;
        }
        let t = (u128::from(self.t1 - self.t0) << k) + u128::from(self.t0);
        u64::try_from(t).ok()
    }

    pub fn is_boundary(&self, t: u64) -> bool {
        if t <= self.t0 {
            return false;
        }
        let off = t - self.t0;
        let base = self.t1 - self.t0;
        off % base == 0 && (off / base).is_power_of_two()
    }
}

/// Per-step emission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutput {
    pub t: u64,
    /// Smoothed level after absorbing `X_t`.
    pub level: f64,
    /// Bootstrap standard error from the first `b1` replicates.
    pub sigma_star: f64,
    /// Band half-width; absent through the initial calibration period.
    pub halfwidth: Option<f64>,
    pub recalibrated: bool,
    pub q_current: Option<f64>,
}

impl StepOutput {
    pub fn lower(&self) -> Option<f64> {
        self.halfwidth.map(|h| self.level - h)
    }

    pub fn upper(&self) -> Option<f64> {
        self.halfwidth.map(|h| self.level + h)
    }
}

/// One bootstrap replicate: latent multiplier chain, its own smoother and
/// its own random stream.
#[derive(Debug, Clone)]
pub struct Replicate {
    latent: MultiplierState,
    smoother: Smoother,
    rng: ChaCha8Rng,
}

impl Replicate {
    pub fn new(params: SmootherParams, rng: ChaCha8Rng) -> Result<Self> {
        Ok(Self { latent: MultiplierState::default(), smoother: Smoother::new(params)?, rng })
    }

    /// Feeds `v * residual` to the replicate smoother; returns the new
    /// bootstrap error.
    #[inline]
    pub fn absorb(&mut self, v: f64, residual: f64) -> f64 {
        self.smoother.advance(v * residual)
    }

    #[inline]
    fn step(&mut self, residual: f64, rho: f64, scale: f64, transform: &Transform, xi: Option<f64>) -> f64 {
        let xi = xi.unwrap_or_else(|| self.rng.sample(StandardNormal));
        let v = self.latent.step(rho, scale, transform, xi);
        self.absorb(v, residual)
    }

    pub fn latent(&self) -> MultiplierState {
        self.latent
    }

    /// Current bootstrap error.
    pub fn delta(&self) -> f64 {
        self.smoother.level()
    }
}

/// Full streaming state.
#[derive(Debug, Clone)]
pub struct Engine {
    cfg: EngineConfig,
    multipliers: MultiplierConfig,
    innovation_scale: f64,
    transform: Transform,
    blocks: u32,
    rank: usize,
    main: Smoother,
    replicates: Vec<Replicate>,
    maxima: Vec<f64>,
    scratch: Vec<f64>,
    q: Option<f64>,
    next_block: u32,
    recalibrations: u32,
    sigma: f64,
    t: u64,
    parallel: bool,
}

impl Engine {
    /// Validates `cfg`, runs the main smoother through the `t0` warm-up
    /// observations and zeroes all replicate state.
    pub fn new(cfg: EngineConfig, warmup: &[f64]) -> Result<Self> {
        cfg.validate()?;
        let multipliers = MultiplierConfig::new(cfg.effective_sample_size()?, cfg.chi)?;
        let transform = cfg.transform.build(multipliers.dof);
        Self::with_transform(cfg, warmup, transform)
    }

    /// As [`Engine::new`] but reuses an already built transform, which must
    /// correspond to the configuration.
    pub fn with_transform(cfg: EngineConfig, warmup: &[f64], transform: Transform) -> Result<Self> {
        cfg.validate()?;
        if warmup.len() as u64 != cfg.t0 {
            return config(format!("warm-up has {} observations, expected t0 = {}", warmup.len(), cfg.t0));
        }
        let multipliers = MultiplierConfig::new(cfg.effective_sample_size()?, cfg.chi)?;
        if transform.kind() != cfg.transform {
            return config(format!("transform {:?} does not match configured {:?}", transform.kind(), cfg.transform));
        }
        if transform.table().is_some_and(|t| t.dof() != multipliers.dof) {
            return config("transform table built for different degrees of freedom");
        }
        let mut main = Smoother::new(cfg.smoother)?;
        for &x in warmup {
            main.update(x)?;
        }
        let replicates = (0..cfg.replicates())
            .map(|b| Replicate::new(cfg.smoother, substream(cfg.seed, b as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            innovation_scale: (1.0 - multipliers.rho * multipliers.rho).sqrt(),
            multipliers,
            transform,
            blocks: cfg.num_blocks(),
            rank: cfg.quantile_rank(),
            main,
            replicates,
            maxima: vec![0.0; cfg.b2],
            scratch: Vec::with_capacity(cfg.b2),
            q: None,
            next_block: 0,
            recalibrations: 0,
            sigma: 0.0,
            t: cfg.t0,
            parallel: false,
            cfg,
        })
    }

    /// Advance replicates concurrently. Output is identical either way.
    pub fn set_parallel(&mut self, parallel: bool) {
        self.parallel = parallel;
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn multiplier_config(&self) -> &MultiplierConfig {
        &self.multipliers
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn level(&self) -> f64 {
        self.main.level()
    }

    pub fn critical_value(&self) -> Option<f64> {
        self.q
    }

    pub fn recalibrations(&self) -> u32 {
        self.recalibrations
    }

    pub fn replicates(&self) -> &[Replicate] {
        &self.replicates
    }

    /// Running standardized maxima of the calibration replicates.
    pub fn maxima(&self) -> &[f64] {
        &self.maxima
    }

    pub fn is_exhausted(&self) -> bool {
        self.t >= self.cfg.t2
    }

    /// Processes observation `X_t` for `t = self.t() + 1`.
    pub fn step(&mut self, x: f64) -> Result<StepOutput> {
        self.check_step(x)?;
        let residual = x - self.main.level();
        let (rho, scale) = (self.multipliers.rho, self.innovation_scale);
        let transform = &self.transform;
        if self.parallel {
            self.replicates.par_iter_mut().for_each(|r| {
                r.step(residual, rho, scale, transform, None);
            });
        } else {
            for r in &mut self.replicates {
                r.step(residual, rho, scale, transform, None);
            }
        }
        Ok(self.finish_step(x))
    }

    /// Like [`Engine::step`] but with caller-supplied innovations, one per
    /// replicate, instead of draws from the replicate streams.
    pub fn step_with_innovations(&mut self, x: f64, xi: &[f64]) -> Result<StepOutput> {
        self.check_step(x)?;
        if xi.len() != self.replicates.len() {
            return config(format!("expected {} innovations, got {}", self.replicates.len(), xi.len()));
        }
        let residual = x - self.main.level();
        let (rho, scale) = (self.multipliers.rho, self.innovation_scale);
        for (r, &e) in self.replicates.iter_mut().zip(xi) {
            r.step(residual, rho, scale, &self.transform, Some(e));
        }
        Ok(self.finish_step(x))
    }

    fn check_step(&self, x: f64) -> Result<()> {
        if self.t >= self.cfg.t2 {
            return Err(Error::SequenceExhausted { t2: self.cfg.t2 });
        }
        if !x.is_finite() {
            return Err(Error::Data(format!("non-finite observation {x} at t = {}", self.t + 1)));
        }
        Ok(())
    }

    fn finish_step(&mut self, x: f64) -> StepOutput {
        self.t += 1;
        let t = self.t;
        let b1 = self.cfg.b1;

        let n = b1 as f64;
        let mean = self.replicates[..b1].iter().map(Replicate::delta).sum::<f64>() / n;
        let ss: f64 = self.replicates[..b1].iter().map(|r| (r.delta() - mean).powi(2)).sum();
        self.sigma = (ss / (n - 1.0)).sqrt();

        if self.sigma > 0.0 {
            let denom = self.sigma.max(SIGMA_FLOOR);
            for (m, r) in self.maxima.iter_mut().zip(&self.replicates[b1..]) {
                let z = r.delta().abs() / denom;
                if z > *m {
                    *m = z;
                }
            }
        }

        let mut recalibrated = false;
        if self.cfg.boundary(self.next_block) == Some(t) {
            self.scratch.clear();
            self.scratch.extend_from_slice(&self.maxima);
            self.scratch.sort_unstable_by(f64::total_cmp);
            self.q = Some(self.scratch[self.rank - 1]);
            self.next_block += 1;
            self.recalibrations += 1;
            recalibrated = true;
        }

        let level = self.main.advance(x);
        let halfwidth = if t > self.cfg.t1 { self.q.map(|q| q * self.sigma) } else { None };
        StepOutput { t, level, sigma_star: self.sigma, halfwidth, recalibrated, q_current: self.q }
    }

    /// Number of calibration blocks K.
    pub fn blocks(&self) -> u32 {
        self.blocks
    }
}

/// Direct evaluation `sum_i w_{t}(i) V_i (X_i - level_{i-1})` of a bootstrap
/// error from closed-form weights. Series are aligned so element 0 is time 1.
pub fn bootstrap_delta_direct(
    params: &SmootherParams,
    v: &[f64],
    x: &[f64],
    lagged_levels: &[f64],
    t: u64,
) -> Result<f64> {
    let n = t as usize;
    if v.len() < n || x.len() < n || lagged_levels.len() < n {
        return config(format!("series shorter than t = {t}"));
    }
    (1..=t).try_fold(0.0, |acc, i| {
        let k = i as usize - 1;
        Ok(acc + weight(params, t, i)? * v[k] * (x[k] - lagged_levels[k]))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ewma_cfg(t0: u64, t1: u64, t2: u64, b1: usize, b2: usize) -> EngineConfig {
        EngineConfig::new(SmootherParams::ewma(0.5).unwrap(), 0.1, t0, t1, t2, b1, b2)
    }

    #[test]
    fn init_runs_warmup() {
        let e = Engine::new(ewma_cfg(0, 4, 10, 2, 2), &[]).unwrap();
        assert_eq!(e.level(), 0.0);
        let e = Engine::new(ewma_cfg(2, 4, 10, 2, 2), &[1.0, 1.0]).unwrap();
        assert_eq!(e.level(), 0.75);
        assert!(e.replicates().iter().all(|r| r.delta() == 0.0 && r.latent().z == 0.0));
        assert!(e.maxima().iter().all(|&m| m == 0.0));
        assert!(matches!(Engine::new(ewma_cfg(2, 4, 10, 2, 2), &[1.0]), Err(Error::Config(_))));
    }

    #[test]
    fn block_count_and_rank() {
        let cfg = ewma_cfg(500, 900, 3500, 40, 160);
        assert_eq!(cfg.num_blocks(), 3);
        let cfg = ewma_cfg(0, 10, 20, 2, 80);
        assert_eq!(cfg.num_blocks(), 1);
        let cfg = ewma_cfg(0, 10, 21, 2, 80);
        assert_eq!(cfg.num_blocks(), 2);
        // alpha = 0.1, K = 3, b2 = 80 -> 78th order statistic
        let cfg = ewma_cfg(0, 10, 80, 2, 80);
        assert_eq!(cfg.num_blocks(), 3);
        assert_eq!(cfg.quantile_rank(), 78);
        // exact integer product: 100 * (1 - 0.2 / 2) = 90
        let mut cfg = ewma_cfg(0, 10, 40, 2, 100);
        cfg.alpha = 0.2;
        assert_eq!(cfg.quantile_rank(), 90);
    }

    #[test]
    fn boundaries() {
        let cfg = ewma_cfg(500, 900, 3500, 2, 2);
        let b: Vec<u64> = (0..4).filter_map(|k| cfg.boundary(k)).collect();
        assert_eq!(b, vec![900, 1300, 2100, 3700]);
        assert!(cfg.is_boundary(2100) && !cfg.is_boundary(1700) && !cfg.is_boundary(500));
    }

    #[test]
    fn rejects_invalid_config() {
        assert!(ewma_cfg(5, 5, 10, 2, 2).validate().is_err());
        assert!(ewma_cfg(0, 5, 5, 2, 2).validate().is_err());
        assert!(ewma_cfg(0, 5, 10, 1, 2).validate().is_err());
        assert!(ewma_cfg(0, 5, 10, 2, 0).validate().is_err());
        let mut c = ewma_cfg(0, 5, 10, 2, 2);
        c.alpha = 1.0;
        assert!(c.validate().is_err());
        let hw = EngineConfig::new(SmootherParams::holt_winters([0.1, 0.1, 0.1], 4).unwrap(), 0.1, 0, 5, 10, 2, 2);
        assert!(matches!(Engine::new(hw.clone(), &[]), Err(Error::Config(_))));
        let hw = EngineConfig { nu: Some(20.0), ..hw };
        assert!(Engine::new(hw, &[]).is_ok());
    }

    #[test]
    fn zero_innovations_annihilate_replicates() {
        let mut e = Engine::new(ewma_cfg(0, 2, 4, 2, 2), &[]).unwrap();
        let out = e.step_with_innovations(3.0, &[0.0; 4]).unwrap();
        assert!(e.replicates().iter().all(|r| r.delta() == 0.0));
        assert_eq!(out.sigma_star, 0.0);
        assert_eq!(out.halfwidth, None);
        assert!(e.maxima().iter().all(|&m| m == 0.0));
    }

    #[test]
    fn single_replicate_hand_evaluation() {
        let mut r = Replicate::new(SmootherParams::ewma(0.5).unwrap(), substream(0, 0)).unwrap();
        // V = 1, X_1 = 2, lagged level 0
        assert_eq!(r.absorb(1.0, 2.0 - 0.0), 1.0);
    }

    #[test]
    fn sequence_exhaustion_and_data_errors() {
        let mut e = Engine::new(ewma_cfg(0, 1, 2, 2, 2), &[]).unwrap();
        assert!(matches!(e.step(f64::NAN), Err(Error::Data(_))));
        e.step(1.0).unwrap();
        e.step(1.0).unwrap();
        assert!(matches!(e.step(1.0), Err(Error::SequenceExhausted { t2: 2 })));
    }

    #[test]
    fn no_band_during_calibration_period() {
        let cfg = ewma_cfg(3, 8, 20, 4, 10).with_seed(9);
        let mut e = Engine::new(cfg, &[0.1, -0.2, 0.3]).unwrap();
        for k in 0..17 {
            let out = e.step((k as f64).sin()).unwrap();
            assert_eq!(out.halfwidth.is_some(), out.t > 8);
            if let (Some(h), Some(q)) = (out.halfwidth, out.q_current) {
                assert_eq!(h, q * out.sigma_star);
            }
            assert_eq!(out.recalibrated, out.t == 8 || out.t == 13 || out.t == 23);
        }
        assert_eq!(e.recalibrations(), 2);
    }

    #[test]
    fn direct_sum_examples() {
        let p = SmootherParams::ewma(0.3).unwrap();
        let x = [1.0, -2.0, 0.5, 4.0];
        assert_eq!(bootstrap_delta_direct(&p, &[0.0; 4], &x, &[0.0; 4], 4).unwrap(), 0.0);
        let mut sm = Smoother::new(p).unwrap();
        let last = x.iter().map(|&v| sm.update(v).unwrap()).last().unwrap();
        let direct = bootstrap_delta_direct(&p, &[1.0; 4], &x, &[0.0; 4], 4).unwrap();
        assert!((direct - last).abs() < 1e-14);
        let hw = SmootherParams::holt_winters([0.1, 0.1, 0.1], 2).unwrap();
        assert!(matches!(bootstrap_delta_direct(&hw, &[1.0], &[1.0], &[0.0], 1), Err(Error::Unsupported(_))));
    }
}
