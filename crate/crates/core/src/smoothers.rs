//! Linear recursive trend estimators and their closed-form weights.
//!
//! Every smoother starts from an all-zero state and is linear in its input
//! sequence, so the true smoothed mean can be obtained by running the same
//! recursion on the mean sequence.

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};

/// Which recursion a smoother runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmootherKind {
    Ewma,
    BrownDouble,
    HoltWintersAdditive { period: usize },
}

/// Smoother recursion together with its smoothing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmootherParams {
    Ewma { eta: f64 },
    Brown { eta: f64 },
    HoltWinters { eta: [f64; 3], period: usize },
}

impl SmootherParams {
    pub fn ewma(eta: f64) -> Result<Self> {
        let p = Self::Ewma { eta };
        p.validate()?;
        Ok(p)
    }

    pub fn brown(eta: f64) -> Result<Self> {
        let p = Self::Brown { eta };
        p.validate()?;
        Ok(p)
    }

    pub fn holt_winters(eta: [f64; 3], period: usize) -> Result<Self> {
        let p = Self::HoltWinters { eta, period };
        p.validate()?;
        Ok(p)
    }

    pub fn kind(&self) -> SmootherKind {
        match *self {
            Self::Ewma { .. } => SmootherKind::Ewma,
            Self::Brown { .. } => SmootherKind::BrownDouble,
            Self::HoltWinters { period, .. } => SmootherKind::HoltWintersAdditive { period },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Ewma { eta } | Self::Brown { eta } => {
                if !(eta > 0.0 && eta < 1.0) {
                    return config(format!("smoothing parameter {eta} must lie in (0, 1)"));
                }
            }
            Self::HoltWinters { eta, period } => {
                if period == 0 {
                    return config("seasonal period must be at least 1");
                }
                if let Some(e) = eta.iter().find(|e| !(0.0..=1.0).contains(*e)) {
                    return config(format!("smoothing parameter {e} must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// Smoothing parameter whose steady-state effective sample size is `nu`.
    /// Only defined for EWMA and Brown; the Brown value is found by bisection.
    pub fn for_effective_sample_size(kind: SmootherKind, nu: f64) -> Result<Self> {
        if !(nu > 1.0 && nu.is_finite()) {
            return config(format!("effective sample size {nu} must exceed 1"));
        }
        match kind {
            SmootherKind::Ewma => Self::ewma(2.0 / (nu + 1.0)),
            SmootherKind::BrownDouble => {
                // nu is decreasing in eta
                let (mut lo, mut hi) = (1e-9_f64, 1.0 - 1e-9);
                if brown_nu(hi) > nu {
                    return config(format!("no Brown smoother reaches nu = {nu}"));
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if brown_nu(mid) > nu {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Self::brown(0.5 * (lo + hi))
            }
            SmootherKind::HoltWintersAdditive { .. } => Err(Error::Unsupported(
                "no effective sample size mapping for Holt-Winters".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmootherState {
    Ewma { s: f64 },
    Brown { s1: f64, s2: f64 },
    HoltWinters { s: f64, b: f64, seasonal: Vec<f64> },
}

/// A running smoother: parameters, recursive state and time index.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoother {
    params: SmootherParams,
    state: SmootherState,
    t: u64,
}

impl Smoother {
    pub fn new(params: SmootherParams) -> Result<Self> {
        params.validate()?;
        let state = match params {
            SmootherParams::Ewma { .. } => SmootherState::Ewma { s: 0.0 },
            SmootherParams::Brown { .. } => SmootherState::Brown { s1: 0.0, s2: 0.0 },
            SmootherParams::HoltWinters { period, .. } => SmootherState::HoltWinters {
                s: 0.0,
                b: 0.0,
                seasonal: vec![0.0; period],
            },
        };
        Ok(Self { params, state, t: 0 })
    }

    pub(crate) fn from_parts(params: SmootherParams, state: SmootherState, t: u64) -> Result<Self> {
        params.validate()?;
        let ok = match (&params, &state) {
            (SmootherParams::Ewma { .. }, SmootherState::Ewma { .. }) => true,
            (SmootherParams::Brown { .. }, SmootherState::Brown { .. }) => true,
            (SmootherParams::HoltWinters { period, .. }, SmootherState::HoltWinters { seasonal, .. }) => {
                seasonal.len() == *period
            }
            _ => false,
        };
        if !ok {
            return config("smoother state does not match its parameters");
        }
        Ok(Self { params, state, t })
    }

    pub fn params(&self) -> &SmootherParams {
        &self.params
    }

    pub fn state(&self) -> &SmootherState {
        &self.state
    }

    /// Number of observations consumed.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Current trend estimate.
    pub fn level(&self) -> f64 {
        match self.state {
            SmootherState::Ewma { s } => s,
            SmootherState::Brown { s1, s2 } => 2.0 * s1 - s2,
            SmootherState::HoltWinters { s, .. } => s,
        }
    }

    /// Consumes one observation and returns the new level.
    pub fn update(&mut self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Data(format!("non-finite observation {x} at t = {}", self.t + 1)));
        }
        Ok(self.advance(x))
    }

    #[inline]
    pub(crate) fn advance(&mut self, x: f64) -> f64 {
        let t = self.t;
        self.t += 1;
        match (&mut self.state, self.params) {
            (SmootherState::Ewma { s }, SmootherParams::Ewma { eta }) => {
                *s = eta * x + (1.0 - eta) * *s;
                *s
            }
            (SmootherState::Brown { s1, s2 }, SmootherParams::Brown { eta }) => {
                *s1 = eta * x + (1.0 - eta) * *s1;
                *s2 = eta * *s1 + (1.0 - eta) * *s2;
                2.0 * *s1 - *s2
            }
            (SmootherState::HoltWinters { s, b, seasonal }, SmootherParams::HoltWinters { eta, period }) => {
                let [e1, e2, e3] = eta;
                // slot t mod L still holds c_{t-L}
                let slot = (t % period as u64) as usize;
                let c_lag = seasonal[slot];
                let s_prev = *s;
                *s = e1 * (x - c_lag) + (1.0 - e1) * (s_prev + *b);
                *b = e2 * (*s - s_prev) + (1.0 - e2) * *b;
                seasonal[slot] = e3 * (x - *s) + (1.0 - e3) * c_lag;
                *s
            }
            _ => unreachable!("state and params are constructed together"),
        }
    }
}

/// Closed-form weight w_{t,eta}(i) of observation i in the level at time t.
pub fn weight(params: &SmootherParams, t: u64, i: u64) -> Result<f64> {
    if i == 0 {
        return domain("weights are indexed from i = 1");
    }
    match *params {
        SmootherParams::Ewma { eta } => Ok(if i > t { 0.0 } else { ewma_weight(eta, t - i) }),
        SmootherParams::Brown { eta } => Ok(if i > t { 0.0 } else { brown_weight(eta, t - i) }),
        SmootherParams::HoltWinters { .. } => {
            Err(Error::Unsupported("closed-form weights for Holt-Winters".into()))
        }
    }
}

#[inline]
fn ewma_weight(eta: f64, lag: u64) -> f64 {
    eta * (1.0 - eta).powi(lag as i32)
}

#[inline]
fn brown_weight(eta: f64, lag: u64) -> f64 {
    eta * (2.0 - eta * (lag as f64 + 1.0)) * (1.0 - eta).powi(lag as i32)
}

/// Effective sample size `1 / sum_i w(i)^2` at the steady-state horizon.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EffectiveSampleSize(f64);

impl EffectiveSampleSize {
    pub fn new(nu: f64) -> Result<Self> {
        if nu.is_finite() && nu > 0.0 {
            Ok(Self(nu))
        } else {
            domain(format!("effective sample size {nu} must be positive"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

pub fn effective_sample_size(params: &SmootherParams) -> Result<EffectiveSampleSize> {
    params.validate()?;
    match *params {
        SmootherParams::Ewma { eta } => EffectiveSampleSize::new((2.0 - eta) / eta),
        SmootherParams::Brown { eta } => EffectiveSampleSize::new(brown_nu(eta)),
        SmootherParams::HoltWinters { .. } => Err(Error::Unsupported(
            "effective sample size for Holt-Winters".into(),
        )),
    }
}

fn brown_nu(eta: f64) -> f64 {
    // weights change sign near lag 2/eta, so only stop once past it
    let turn = (2.0 / eta).ceil() as u64 + 1;
    let mut sum = 0.0;
    let mut lag = 0u64;
    loop {
        let w = brown_weight(eta, lag);
        let inc = w * w;
        sum += inc;
        if lag > turn && inc < 1e-12 * sum.max(1e-300) {
            break;
        }
        lag += 1;
    }
    1.0 / sum
}

/// Weight-function distance between relative times `s` and `t` for EWMA
/// weights, using the rescaled weights `nu * w` on horizon `c * nu` and the
/// normalized gamma-norm.
pub fn weight_distance(eta: f64, s: f64, t: f64, gamma: f64, c: u32) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return domain(format!("eta {eta} outside (0, 1)"));
    }
    if !(gamma > 2.0) || c == 0 {
        return domain("weight distance needs gamma > 2 and c >= 1");
    }
    let lo = 1.0 / c as f64;
    for v in [s, t] {
        if !(lo..=1.0).contains(&v) {
            return domain(format!("time {v} outside [1/c, 1] = [{lo}, 1]"));
        }
    }
    let nu = (2.0 - eta) / eta;
    let horizon = |u: f64| (u * c as f64 * nu).floor() as u64;
    let (ms, mt) = (horizon(s), horizon(t));
    let top = ms.max(mt);
    let g = |m: u64, i: u64| if i > m { 0.0 } else { nu * ewma_weight(eta, m - i) };
    let total: f64 = (1..=top).map(|i| (g(ms, i) - g(mt, i)).abs().powf(gamma)).sum();
    Ok((total / nu).powf(1.0 / gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run(params: SmootherParams, xs: &[f64]) -> Vec<f64> {
        let mut sm = Smoother::new(params).unwrap();
        xs.iter().map(|&x| sm.update(x).unwrap()).collect()
    }

    #[test]
    fn init_is_zero() {
        let e = Smoother::new(SmootherParams::ewma(0.5).unwrap()).unwrap();
        assert_eq!(e.state(), &SmootherState::Ewma { s: 0.0 });
        assert_eq!(e.t(), 0);
        let b = Smoother::new(SmootherParams::brown(0.3).unwrap()).unwrap();
        assert_eq!(b.state(), &SmootherState::Brown { s1: 0.0, s2: 0.0 });
        let hw = Smoother::new(SmootherParams::holt_winters([0.3, 0.1, 0.2], 4).unwrap()).unwrap();
        assert_eq!(
            hw.state(),
            &SmootherState::HoltWinters { s: 0.0, b: 0.0, seasonal: vec![0.0; 4] }
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SmootherParams::ewma(0.0).is_err());
        assert!(SmootherParams::ewma(1.0).is_err());
        assert!(SmootherParams::brown(-0.1).is_err());
        assert!(SmootherParams::holt_winters([0.1, 0.1, 0.1], 0).is_err());
        assert!(SmootherParams::holt_winters([0.1, 1.2, 0.1], 3).is_err());
        assert!(Smoother::new(SmootherParams::Ewma { eta: 2.0 }).is_err());
    }

    #[test]
    fn hand_iterations() {
        assert_eq!(run(SmootherParams::ewma(0.5).unwrap(), &[1.0, 1.0]), vec![0.5, 0.75]);
        let mut b = Smoother::new(SmootherParams::brown(0.5).unwrap()).unwrap();
        assert_eq!(b.update(1.0).unwrap(), 0.75);
        assert_eq!(b.state(), &SmootherState::Brown { s1: 0.5, s2: 0.25 });
    }

    #[test]
    fn holt_winters_hand_iteration() {
        // L = 2, eta = (0.5, 0.5, 0.5), inputs 2, 4, 6
        let mut hw = Smoother::new(SmootherParams::holt_winters([0.5, 0.5, 0.5], 2).unwrap()).unwrap();
        // t=1: s=1, b=0.5, c1=0.5
        assert_eq!(hw.update(2.0).unwrap(), 1.0);
        // t=2: s=0.5*4+0.5*1.5=2.75, b=0.5*1.75+0.25=1.125, c2=0.625
        assert_eq!(hw.update(4.0).unwrap(), 2.75);
        // t=3: s=0.5*(6-0.5)+0.5*(2.75+1.125)=4.6875
        assert_eq!(hw.update(6.0).unwrap(), 4.6875);
    }

    #[test]
    fn zero_stream_stays_zero() {
        for p in [
            SmootherParams::ewma(0.2).unwrap(),
            SmootherParams::brown(0.2).unwrap(),
            SmootherParams::holt_winters([0.2, 0.3, 0.4], 5).unwrap(),
        ] {
            assert!(run(p, &[0.0; 50]).iter().all(|&l| l == 0.0));
        }
    }

    #[test]
    fn non_finite_input_is_data_error() {
        let mut sm = Smoother::new(SmootherParams::ewma(0.5).unwrap()).unwrap();
        assert!(matches!(sm.update(f64::NAN), Err(Error::Data(_))));
        assert_eq!(sm.t(), 0);
    }

    #[test]
    fn weight_examples() {
        let e = SmootherParams::ewma(0.5).unwrap();
        assert_eq!(weight(&e, 4, 4).unwrap(), 0.5);
        assert_eq!(weight(&e, 3, 1).unwrap(), 0.125);
        assert_eq!(weight(&e, 3, 7).unwrap(), 0.0);
        let b = SmootherParams::brown(0.5).unwrap();
        assert_eq!(weight(&b, 9, 9).unwrap(), 0.75);
        let hw = SmootherParams::holt_winters([0.1, 0.1, 0.1], 3).unwrap();
        assert!(matches!(weight(&hw, 3, 1), Err(Error::Unsupported(_))));
        assert!(weight(&e, 3, 0).is_err());
    }

    #[test]
    fn effective_sample_sizes() {
        let nu = |p| effective_sample_size(&p).unwrap().get();
        assert_eq!(nu(SmootherParams::ewma(0.5).unwrap()), 3.0);
        assert!((nu(SmootherParams::ewma(0.1).unwrap()) - 19.0).abs() < 1e-12);
        // brute-force squared-weight sum over 200 steps
        let b = SmootherParams::brown(0.5).unwrap();
        let brute: f64 = (1..=200).map(|i| weight(&b, 200, i).unwrap().powi(2)).sum();
        assert!((nu(b) - 1.0 / brute).abs() < 1e-9);
        let hw = SmootherParams::holt_winters([0.1, 0.1, 0.1], 3).unwrap();
        assert!(matches!(effective_sample_size(&hw), Err(Error::Unsupported(_))));
    }

    #[test]
    fn eta_from_effective_sample_size() {
        let e = SmootherParams::for_effective_sample_size(SmootherKind::Ewma, 19.0).unwrap();
        assert!(matches!(e, SmootherParams::Ewma { eta } if (eta - 0.1).abs() < 1e-15));
        let b = SmootherParams::for_effective_sample_size(SmootherKind::BrownDouble, 40.0).unwrap();
        assert!((effective_sample_size(&b).unwrap().get() - 40.0).abs() < 1e-6);
    }

    #[test]
    fn weight_distance_examples() {
        assert_eq!(weight_distance(0.2, 0.7, 0.7, 3.0, 2).unwrap(), 0.0);
        let d = weight_distance(0.2, 0.5, 0.6, 3.0, 2).unwrap();
        let bound = 4.0 * 2f64.powf(1.0 / 3.0) * (0.1f64 + 0.2).powf(1.0 / 3.0);
        assert!(d > 0.0 && d <= bound);
        assert_eq!(d, weight_distance(0.2, 0.6, 0.5, 3.0, 2).unwrap());
        assert!(weight_distance(0.2, 0.4, 0.6, 3.0, 2).is_err());
        assert!(weight_distance(0.2, 0.5, 1.1, 3.0, 2).is_err());
    }

    #[test]
    fn weight_sum_tail_is_geometric() {
        for eta in [0.05, 0.3, 0.8] {
            let p = SmootherParams::ewma(eta).unwrap();
            for t in [1u64, 5, 40] {
                let s: f64 = (1..=t).map(|i| weight(&p, t, i).unwrap()).sum();
                assert!(((1.0 - s) - (1.0 - eta).powi(t as i32)).abs() < 1e-13);
            }
        }
    }

    proptest! {
        #[test]
        fn recursion_matches_closed_form(
            eta in 0.01f64..0.99,
            brown in any::<bool>(),
            xs in proptest::collection::vec(-10.0f64..10.0, 1..200),
        ) {
            let p = if brown { SmootherParams::brown(eta).unwrap() } else { SmootherParams::ewma(eta).unwrap() };
            let levels = run(p, &xs);
            for (k, &level) in levels.iter().enumerate() {
                let t = k as u64 + 1;
                let direct: f64 = (1..=t).map(|i| weight(&p, t, i).unwrap() * xs[i as usize - 1]).sum();
                prop_assert!((level - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
            }
        }

        #[test]
        fn smoothers_are_linear(
            eta in 0.01f64..0.99,
            eta3 in proptest::array::uniform3(0.0f64..=1.0),
            period in 1usize..12,
            which in 0u8..3,
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..150),
        ) {
            let p = match which {
                0 => SmootherParams::ewma(eta).unwrap(),
                1 => SmootherParams::brown(eta).unwrap(),
                _ => SmootherParams::holt_winters(eta3, period).unwrap(),
            };
            let xs: Vec<f64> = pairs.iter().map(|q| q.0).collect();
            let ys: Vec<f64> = pairs.iter().map(|q| q.1).collect();
            let zs: Vec<f64> = pairs.iter().map(|q| a * q.0 + b * q.1).collect();
            let (lx, ly, lz) = (run(p, &xs), run(p, &ys), run(p, &zs));
            for k in 0..zs.len() {
                let want = a * lx[k] + b * ly[k];
                prop_assert!((lz[k] - want).abs() <= 1e-10 * (1.0 + want.abs()));
            }
        }

        #[test]
        fn scaled_ewma_weights_bounded_by_two(eta in 0.001f64..0.999, t in 1u64..500, lag in 0u64..500) {
            let p = SmootherParams::ewma(eta).unwrap();
            let nu = effective_sample_size(&p).unwrap().get();
            let i = t.saturating_sub(lag).max(1);
            prop_assert!(nu * weight(&p, t, i).unwrap() <= 2.0);
        }
    }
}
