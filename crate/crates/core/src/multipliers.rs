//! AR(1) latent Gaussian multipliers pushed through a heavy-tailing map.
//!
//! The latent chain is `z' = rho z + sqrt(1 - rho^2) xi` with `xi ~ N(0, 1)`,
//! and each multiplier is `V = T(z')` where `T` composes the normal CDF with
//! a unit-variance Student-t quantile. `rho = 1 - nu^(-chi)` and the t law has
//! `2 + nu^(1/3)` degrees of freedom, both fixed once per run.

use std::sync::Arc;

use crate::error::{config, Result};
use crate::numerics::{
    normal_pdf, phi, std_normal_cdf, unit_t_quantile_unchecked, unit_variance_t_pdf,
    unit_variance_t_quantile, DegreesOfFreedom,
};
use crate::smoothers::EffectiveSampleSize;

/// Default persistence exponent.
pub const DEFAULT_CHI: f64 = 1.0 / 3.0;

/// `1 - nu^(-chi)`. `chi = 0` gives independent multipliers.
pub fn persistence(nu: f64, chi: f64) -> Result<f64> {
    if !(nu > 0.0 && nu.is_finite()) {
        return config(format!("effective sample size {nu} must be positive"));
    }
    if !(chi >= 0.0 && chi.is_finite()) {
        return config(format!("persistence exponent chi = {chi} must be >= 0"));
    }
    Ok(1.0 - nu.powf(-chi))
}

/// Degrees of freedom `2 + nu^(1/3)` of the multiplier t law.
pub fn transform_dof(nu: f64) -> Result<DegreesOfFreedom> {
    DegreesOfFreedom::new(2.0 + nu.cbrt())
}

/// Exact `T(z) = t_dof^{-1}(Phi(z))` on the unit-variance t scale.
pub fn transform_t(z: f64, dof: DegreesOfFreedom) -> Result<f64> {
    let p = std_normal_cdf(z)?;
    if z > 0.0 {
        // evaluate in the lower tail where Phi keeps full relative precision
        Ok(-unit_variance_t_quantile(phi(-z), dof)?)
    } else {
        unit_variance_t_quantile(p, dof)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierConfig {
    pub nu: EffectiveSampleSize,
    pub chi: f64,
    pub rho: f64,
    pub dof: DegreesOfFreedom,
}

impl MultiplierConfig {
    pub fn new(nu: EffectiveSampleSize, chi: f64) -> Result<Self> {
        let rho = persistence(nu.get(), chi)?;
        let dof = transform_dof(nu.get())?;
        Ok(Self { nu, chi, rho, dof })
    }

    /// Whether chi lies inside (0, 1/2), the range the asymptotic theory covers.
    pub fn chi_in_theory_range(&self) -> bool {
        self.chi > 0.0 && self.chi < 0.5
    }
}

const TABLE_HALF_RANGE: f64 = 6.0;
const TABLE_NODES_PER_UNIT: usize = 128;

/// Piecewise cubic Hermite interpolant of `T` on `[-6, 6]`, built from exact
/// values and exact derivatives `T'(z) = phi(z) / f_t(T(z))`. Arguments
/// outside the grid fall back to the exact evaluation.
#[derive(Debug)]
pub struct TransformTable {
    dof: DegreesOfFreedom,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl TransformTable {
    pub fn new(dof: DegreesOfFreedom) -> Self {
        let n = 2 * TABLE_HALF_RANGE as usize * TABLE_NODES_PER_UNIT + 1;
        let h = 1.0 / TABLE_NODES_PER_UNIT as f64;
        let half = n / 2;
        let mut values = vec![0.0; n];
        let mut slopes = vec![0.0; n];
        for k in 0..=half {
            // node half - k sits at z = -k h; T is odd
            let z = -(k as f64) * h;
            let v = if k == 0 { 0.0 } else { unit_t_quantile_unchecked(phi(z), dof.get()) };
            let d = normal_pdf(z) / unit_variance_t_pdf(v, dof);
            values[half - k] = v;
            values[half + k] = -v;
            slopes[half - k] = d;
            slopes[half + k] = d;
        }
        Self { dof, values, slopes }
    }

    pub fn dof(&self) -> DegreesOfFreedom {
        self.dof
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        let u = (z + TABLE_HALF_RANGE) * TABLE_NODES_PER_UNIT as f64;
        if !(u >= 0.0 && u < (self.values.len() - 1) as f64) {
            return exact_or_limit(z, self.dof);
        }
        let k = u as usize;
        let s = u - k as f64;
        let h = 1.0 / TABLE_NODES_PER_UNIT as f64;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1
    }
}

fn exact_or_limit(z: f64, dof: DegreesOfFreedom) -> f64 {
    if z.is_nan() {
        return z;
    }
    match transform_t(z, dof) {
        Ok(v) if v.is_finite() => v,
        _ => z.signum() * f64::MAX,
    }
}

/// Map applied to the latent chain.
#[derive(Debug, Clone)]
pub enum Transform {
    /// Unit-variance Student-t quantile of the normal CDF (tabulated).
    StudentT(Arc<TransformTable>),
    /// Standard-scale Student-t quantile of the normal CDF, i.e. the
    /// unit-variance map times `sqrt(d / (d - 2))`.
    StandardT { table: Arc<TransformTable>, scale: f64 },
    /// `V = Z`; the ablation without heavy tails.
    Identity,
}

impl Transform {
    pub fn student_t(dof: DegreesOfFreedom) -> Self {
        Self::StudentT(Arc::new(TransformTable::new(dof)))
    }

    pub fn standard_t(dof: DegreesOfFreedom) -> Self {
        let d = dof.get();
        Self::StandardT { table: Arc::new(TransformTable::new(dof)), scale: (d / (d - 2.0)).sqrt() }
    }

    pub fn kind(&self) -> TransformKind {
        match self {
            Self::StudentT(_) => TransformKind::StudentT,
            Self::StandardT { .. } => TransformKind::StandardT,
            Self::Identity => TransformKind::Identity,
        }
    }

    /// Tabulated map, if any.
    pub fn table(&self) -> Option<&TransformTable> {
        match self {
            Self::StudentT(table) | Self::StandardT { table, .. } => Some(table),
            Self::Identity => None,
        }
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            Self::StudentT(table) => table.eval(z),
            Self::StandardT { table, scale } => scale * table.eval(z),
            Self::Identity => z,
        }
    }
}

/// Which transform a configuration asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// Unit variance.
    #[default]
    StudentT,
    /// Plain `t_d` quantile, variance `d / (d - 2)`.
    StandardT,
    Identity,
}

impl TransformKind {
    pub fn build(self, dof: DegreesOfFreedom) -> Transform {
        match self {
            Self::StudentT => Transform::student_t(dof),
            Self::StandardT => Transform::standard_t(dof),
            Self::Identity => Transform::Identity,
        }
    }
}

/// Latent Gaussian value of one replicate; starts at zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MultiplierState {
    pub z: f64,
}

impl MultiplierState {
    /// Advances the chain with innovation `xi` and returns the multiplier.
    #[inline]
    pub fn step(&mut self, rho: f64, innovation_scale: f64, transform: &Transform, xi: f64) -> f64 {
        self.z = rho * self.z + innovation_scale * xi;
        transform.apply(self.z)
    }
}

/// One multiplier step: `z' = rho z + sqrt(1 - rho^2) xi`, `V = T(z')`.
pub fn multiplier_step(
    state: MultiplierState,
    cfg: &MultiplierConfig,
    transform: &Transform,
    xi: f64,
) -> (MultiplierState, f64) {
    let mut next = state;
    let v = next.step(cfg.rho, (1.0 - cfg.rho * cfg.rho).sqrt(), transform, xi);
    (next, v)
}
