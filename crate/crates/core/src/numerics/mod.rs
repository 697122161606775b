//! Special functions behind the multiplier transform and the baselines,
//! plus the seeding contract shared by every stochastic component.
//!
//! The Student-t routines accept non-integer degrees of freedom. Quantiles
//! are obtained by inverting the regularized incomplete beta function and
//! then polished with Newton steps on the t CDF itself.

mod beta;
pub mod rng;

pub(crate) use beta::{ln_beta, reg_inc_beta};

use crate::error::{domain, Result};
use beta::inv_reg_inc_beta;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// A value in the closed unit interval.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(p: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&p) {
            Ok(Self(p))
        } else {
            domain(format!("probability {p} outside [0, 1]"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Degrees of freedom of the unit-variance Student-t law; must exceed 2.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DegreesOfFreedom(f64);

impl DegreesOfFreedom {
    pub fn new(d: f64) -> Result<Self> {
        if d.is_finite() && d > 2.0 {
            Ok(Self(d))
        } else {
            domain(format!("degrees of freedom {d} must be finite and > 2"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("normal cdf of non-finite {x}"));
    }
    Ok(phi(x))
}

#[inline]
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

#[inline]
pub(crate) fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal quantile, valid on the open unit interval.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("normal quantile needs p in (0, 1), got {p}"));
    }
    // 1 - p is exact for p >= 1/2, so the result is exactly odd around 1/2
    if p > 0.5 {
        Ok(-lower_normal_quantile(1.0 - p))
    } else {
        Ok(lower_normal_quantile(p))
    }
}

/// Quantile for p <= 1/2: Wichura's AS241 followed by one Halley step.
fn lower_normal_quantile(p: f64) -> f64 {
    let q = p - 0.5;
    let x = if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        q * poly(
            r,
            &[
                3.387_132_872_796_366_608,
                1.331_416_678_917_843_774_5e2,
                1.971_590_950_306_551_442_7e3,
                1.373_169_376_550_946_112_5e4,
                4.592_195_393_154_987_145_7e4,
                6.726_577_092_700_870_085_3e4,
                3.343_057_558_358_812_810_5e4,
                2.509_080_928_730_122_672_7e3,
            ],
        ) / poly(
            r,
            &[
                1.0,
                4.231_333_070_160_091_125_2e1,
                6.871_870_074_920_579_083e2,
                5.394_196_021_424_751_107_7e3,
                2.121_379_430_158_659_586_7e4,
                3.930_789_580_009_271_061e4,
                2.872_908_573_572_194_267_4e4,
                5.226_495_278_852_854_561e3,
            ],
        )
    } else {
        let mut r = (-p.ln()).sqrt();
        let v = if r <= 5.0 {
            r -= 1.6;
            poly(
                r,
                &[
                    1.423_437_110_749_683_577_34,
                    4.630_337_846_156_545_295_9,
                    5.769_497_221_460_691_405_5,
                    3.647_848_324_763_204_605_04,
                    1.270_458_252_452_368_382_58,
                    2.417_807_251_774_506_117_7e-1,
                    2.272_384_498_926_918_458_33e-2,
                    7.745_450_142_783_414_076_4e-4,
                ],
            ) / poly(
                r,
                &[
                    1.0,
                    2.053_191_626_637_758_821_87,
                    1.676_384_830_183_803_849_4,
                    6.897_673_349_851_000_045_5e-1,
                    1.481_039_764_274_800_745_9e-1,
                    1.519_866_656_361_645_719_66e-2,
                    5.475_938_084_995_344_946e-4,
                    1.050_750_071_644_416_843_24e-9,
                ],
            )
        } else {
            r -= 5.0;
            poly(
                r,
                &[
                    6.657_904_643_501_103_777_2,
                    5.463_784_911_164_114_369_9,
                    1.784_826_539_917_291_335_8,
                    2.965_605_718_285_048_912_3e-1,
                    2.653_218_952_657_612_309_3e-2,
                    1.242_660_947_388_078_438_6e-3,
                    2.711_555_568_743_487_578_15e-5,
                    2.010_334_399_292_288_132_65e-7,
                ],
            ) / poly(
                r,
                &[
                    1.0,
                    5.998_322_065_558_879_376_9e-1,
                    1.369_298_809_227_358_053_1e-1,
                    1.487_536_129_085_061_485_25e-2,
                    7.868_691_311_456_132_591e-4,
                    1.846_318_317_510_054_681_8e-5,
                    1.421_511_758_316_445_888_7e-7,
                    2.044_263_103_389_939_785_64e-15,
                ],
            )
        };
        -v
    };
    let err = phi(x) - p;
    let u = err * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

#[inline]
fn poly(x: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// CDF of the standard (not unit-variance) Student-t law with `d` degrees of
/// freedom. `d` only needs to be positive here.
pub(crate) fn student_t_cdf(t: f64, d: f64) -> f64 {
    let t2 = t * t;
    if t2 < d {
        let half = 0.5 * reg_inc_beta(0.5, 0.5 * d, t2 / (d + t2));
        if t < 0.0 {
            0.5 - half
        } else {
            0.5 + half
        }
    } else {
        let tail = 0.5 * reg_inc_beta(0.5 * d, 0.5, d / (d + t2));
        if t < 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }
}

/// Density of the standard Student-t law.
pub(crate) fn student_t_pdf(t: f64, d: f64) -> f64 {
    let ln_norm = -0.5 * d.ln() - ln_beta(0.5 * d, 0.5);
    (ln_norm - 0.5 * (d + 1.0) * (t * t / d).ln_1p()).exp()
}

/// Quantile of the standard Student-t law, p in (0, 1/2].
fn lower_student_t_quantile(p: f64, d: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    // P(|T| > |t|) = I_x(d/2, 1/2) with x = d / (d + t^2), and
    // P(|T| < |t|) = I_y(1/2, d/2) with y = t^2 / (d + t^2).
    let mut t = if p < 0.25 {
        let x = inv_reg_inc_beta(2.0 * p, 0.5 * d, 0.5);
        -(d * (1.0 - x) / x).sqrt()
    } else {
        let y = inv_reg_inc_beta(1.0 - 2.0 * p, 0.5, 0.5 * d);
        -(d * y / (1.0 - y)).sqrt()
    };
    for _ in 0..8 {
        let f = student_t_pdf(t, d);
        if !(f > 0.0) || !t.is_finite() {
            break;
        }
        let step = (student_t_cdf(t, d) - p) / f;
        t -= step;
        if step.abs() <= 1e-12 * t.abs().max(1e-300) {
            break;
        }
    }
    t
}

/// p-quantile of the Student-t law with `d` degrees of freedom, rescaled to
/// unit variance: `sqrt((d - 2) / d)` times the standard t quantile.
pub fn unit_variance_t_quantile(p: f64, d: DegreesOfFreedom) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("t quantile needs p in (0, 1), got {p}"));
    }
    Ok(unit_t_quantile_unchecked(p, d.get()))
}

pub(crate) fn unit_t_quantile_unchecked(p: f64, d: f64) -> f64 {
    let scale = ((d - 2.0) / d).sqrt();
    if p > 0.5 {
        -scale * lower_student_t_quantile(1.0 - p, d)
    } else {
        scale * lower_student_t_quantile(p, d)
    }
}

/// Density of the unit-variance Student-t law.
pub fn unit_variance_t_pdf(u: f64, d: DegreesOfFreedom) -> f64 {
    let d = d.get();
    let scale = ((d - 2.0) / d).sqrt();
    student_t_pdf(u / scale, d) / scale
}
