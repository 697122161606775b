//! Versioned textual snapshot of the full engine state, for pausing and
//! resuming long streams. The record is a JSON object; reals are written in
//! shortest round-trip form so a restored engine continues bit-identically.

use serde::{Deserialize, Serialize};

use super::{Engine, EngineConfig, Replicate};
use crate::error::{Error, Result};
use crate::multipliers::{MultiplierConfig, MultiplierState};
use crate::numerics::rng::substream;
use crate::smoothers::{Smoother, SmootherState};

pub const SNAPSHOT_FORMAT: &str = "trendband.engine";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSnapshot {
    pub format: String,
    pub version: u32,
    pub config: EngineConfig,
    pub t: u64,
    pub main_state: SmootherState,
    pub replicates: Vec<ReplicateSnapshot>,
    pub maxima: Vec<f64>,
    pub critical_value: Option<f64>,
    pub next_block: u32,
    pub recalibrations: u32,
    pub sigma_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicateSnapshot {
    pub z: f64,
    pub smoother: SmootherState,
    /// Position in the replicate's ChaCha stream, as a decimal string.
    pub word_pos: String,
}

impl Engine {
    pub fn snapshot(&self) -> EngineSnapshot {
        EngineSnapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            config: self.cfg.clone(),
            t: self.t,
            main_state: self.main.state().clone(),
            replicates: self
                .replicates
                .iter()
                .map(|r| ReplicateSnapshot {
                    z: r.latent.z,
                    smoother: r.smoother.state().clone(),
                    word_pos: r.rng.get_word_pos().to_string(),
                })
                .collect(),
            maxima: self.maxima.clone(),
            critical_value: self.q,
            next_block: self.next_block,
            recalibrations: self.recalibrations,
            sigma_star: self.sigma,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.snapshot()).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: EngineSnapshot =
            serde_json::from_str(text).map_err(|e| Error::Snapshot(e.to_string()))?;
        Self::restore(snap)
    }

    pub fn restore(snap: EngineSnapshot) -> Result<Self> {
        if snap.format != SNAPSHOT_FORMAT || snap.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported snapshot {} v{}",
                snap.format, snap.version
            )));
        }
        let cfg = snap.config;
        cfg.validate()?;
        if snap.replicates.len() != cfg.replicates() || snap.maxima.len() != cfg.b2 {
            return Err(Error::Snapshot("replicate count does not match configuration".into()));
        }
        if snap.t < cfg.t0 || snap.t > cfg.t2 {
            return Err(Error::Snapshot(format!("time {} outside [t0, t2]", snap.t)));
        }
        let multipliers = MultiplierConfig::new(cfg.effective_sample_size()?, cfg.chi)?;
        let transform = cfg.transform.build(multipliers.dof);
        let mut engine = Engine::with_transform(cfg.clone(), &vec![0.0; cfg.t0 as usize], transform)?;
        engine.main = Smoother::from_parts(cfg.smoother, snap.main_state, snap.t)?;
        engine.replicates = snap
            .replicates
            .into_iter()
            .enumerate()
            .map(|(b, r)| {
                let mut rng = substream(cfg.seed, b as u64);
                let pos: u128 = r
                    .word_pos
                    .parse()
                    .map_err(|_| Error::Snapshot(format!("bad word position {:?}", r.word_pos)))?;
                rng.set_word_pos(pos);
                Ok(Replicate {
                    latent: MultiplierState { z: r.z },
                    smoother: Smoother::from_parts(cfg.smoother, r.smoother, snap.t - cfg.t0)?,
                    rng,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        engine.maxima = snap.maxima;
        engine.q = snap.critical_value;
        engine.next_block = snap.next_block;
        engine.recalibrations = snap.recalibrations;
        engine.sigma = snap.sigma_star;
        engine.t = snap.t;
        Ok(engine)
    }
}
