//! Sequential test decisions from a stream of band outputs.

use super::StepOutput;
use crate::error::{config, Error, Result};

/// Direction of the rejection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Side {
    /// Reject when `|level - center| > halfwidth`.
    #[default]
    TwoSided,
    /// Reject when `level - center > halfwidth`.
    Upper,
    /// Reject when `center - level > halfwidth`.
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Decision {
    pub exceeded: bool,
    pub first_exceed_time: Option<u64>,
}

/// Streaming form of the test: O(1) state, fed one output at a time.
/// Only times `t > start` are evaluated.
#[derive(Debug, Clone)]
pub struct SequentialTest {
    start: u64,
    side: Side,
    decision: Decision,
    evaluated: u64,
}

impl SequentialTest {
    pub fn new(start: u64, side: Side) -> Self {
        Self { start, side, decision: Decision::default(), evaluated: 0 }
    }

    /// Returns true if `out` exceeds the band around `center`.
    pub fn observe(&mut self, out: &StepOutput, center: f64) -> Result<bool> {
        if out.t <= self.start {
            return Ok(false);
        }
        let Some(h) = out.halfwidth else {
            return Err(Error::NotCalibrated { t1: self.start });
        };
        self.evaluated += 1;
        let dev = out.level - center;
        let hit = match self.side {
            Side::TwoSided => dev.abs() > h,
            Side::Upper => dev > h,
            Side::Lower => -dev > h,
        };
        if hit && !self.decision.exceeded {
            self.decision = Decision { exceeded: true, first_exceed_time: Some(out.t) };
        }
        Ok(hit)
    }

    pub fn decision(&self) -> Result<Decision> {
        if self.evaluated == 0 {
            return Err(Error::NotCalibrated { t1: self.start });
        }
        Ok(self.decision)
    }
}

/// Applies the rejection rule over all outputs with `t > t1`, comparing the
/// level to `null_center` (aligned element-wise with `outputs`).
pub fn run_test(outputs: &[StepOutput], null_center: &[f64], t1: u64, side: Side) -> Result<Decision> {
    if outputs.len() != null_center.len() {
        return config(format!(
            "{} outputs but {} null-center values",
            outputs.len(),
            null_center.len()
        ));
    }
    let mut test = SequentialTest::new(t1, side);
    for (out, &c) in outputs.iter().zip(null_center) {
        test.observe(out, c)?;
    }
    test.decision()
}
