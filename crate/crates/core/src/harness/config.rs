//! TOML experiment configuration with sections `[dgp]`, `[engine]` and
//! `[experiment]`. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dgp::{DgpParams, DgpPreset, Innovation, MAIN_PHIS};
use crate::error::{config, Error, Result};
use crate::multipliers::{TransformKind, DEFAULT_CHI};
use crate::smoothers::{SmootherKind, SmootherParams};

/// A scalar or a list of scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    One(f64),
    Many(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::One(v) => vec![*v],
            Self::Many(v) => v.clone(),
        }
    }
}

impl From<Vec<f64>> for Grid {
    fn from(v: Vec<f64>) -> Self {
        Self::Many(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ours,
    Iid,
    Ws,
}

impl Method {
    pub fn id(self) -> &'static str {
        match self {
            Self::Ours => "ours",
            Self::Iid => "iid",
            Self::Ws => "ws",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(Self::Ours),
            "iid" => Ok(Self::Iid),
            "ws" => Ok(Self::Ws),
            other => config(format!("unknown method {other:?} (expected ours, iid or ws)")),
        }
    }
}

fn method_ids<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<Method>, D::Error> {
    let raw = Vec::<String>::deserialize(d)?;
    raw.iter().map(|s| Method::parse(s).map_err(serde::de::Error::custom)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSection {
    pub preset: DgpPreset,
    #[serde(default = "default_phis")]
    pub phi: Grid,
    /// Slope grid; the preset value when absent.
    #[serde(default)]
    pub a: Option<Grid>,
    pub mu: Option<f64>,
    pub amplitude: Option<f64>,
    pub period: Option<f64>,
    pub psi: Option<f64>,
    pub p: Option<f64>,
    pub sigma_j: Option<f64>,
    pub sigma: Option<f64>,
    pub innovation: Option<Innovation>,
}

fn default_phis() -> Grid {
    Grid::Many(MAIN_PHIS.to_vec())
}

impl DgpSection {
    pub fn new(preset: DgpPreset, phi: Vec<f64>) -> Self {
        Self {
            preset,
            phi: Grid::Many(phi),
            a: None,
            mu: None,
            amplitude: None,
            period: None,
            psi: None,
            p: None,
            sigma_j: None,
            sigma: None,
            innovation: None,
        }
    }

    /// Every `(phi, a)` combination, phi-major.
    pub fn expand(&self) -> Result<Vec<DgpParams>> {
        let mut out = Vec::new();
        for phi in self.phi.values() {
            let base = DgpParams::preset(self.preset, phi);
            let slopes = self.a.as_ref().map_or(vec![base.a], Grid::values);
            for a in slopes {
                let p = DgpParams {
                    mu: self.mu.unwrap_or(base.mu),
                    a,
                    amp: self.amplitude.unwrap_or(base.amp),
                    period: self.period.unwrap_or(base.period),
                    psi: self.psi.unwrap_or(base.psi),
                    p: self.p.unwrap_or(base.p),
                    sigma_j: self.sigma_j.unwrap_or(base.sigma_j),
                    phi,
                    sigma: self.sigma.unwrap_or(base.sigma),
                    innovation: self.innovation.unwrap_or(base.innovation),
                };
                p.validate()?;
                out.push(p);
            }
        }
        if out.is_empty() {
            return config("empty DGP grid");
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    #[serde(default = "default_smoother")]
    pub smoother: String,
    pub alpha: f64,
    /// Effective-sample-size grid; exclusive with `eta`.
    pub nu: Option<Grid>,
    pub eta: Option<Grid>,
    pub t0: u64,
    pub t1: u64,
    pub t2: u64,
    pub b1: usize,
    pub b2: usize,
    #[serde(default = "default_chi")]
    pub chi: f64,
    #[serde(default)]
    pub transform: TransformKind,
}

fn default_smoother() -> String {
    "ewma".into()
}

fn default_chi() -> f64 {
    DEFAULT_CHI
}

impl EngineSection {
    pub fn smoother_kind(&self) -> Result<SmootherKind> {
        match self.smoother.as_str() {
            "ewma" => Ok(SmootherKind::Ewma),
            "brown" => Ok(SmootherKind::BrownDouble),
            "holt_winters" => Err(Error::Unsupported(
                "Holt-Winters has no weight grid; run it through the engine directly".into(),
            )),
            other => config(format!("unknown smoother {other:?}")),
        }
    }

    /// Smoother parameters for every grid point.
    pub fn smoothers(&self) -> Result<Vec<SmootherParams>> {
        let kind = self.smoother_kind()?;
        let list: Vec<SmootherParams> = match (&self.nu, &self.eta) {
            (Some(nu), None) => {
                nu.values().into_iter().map(|n| SmootherParams::for_effective_sample_size(kind, n)).collect()
            }
            (None, Some(eta)) => eta
                .values()
                .into_iter()
                .map(|e| match kind {
                    SmootherKind::Ewma => SmootherParams::ewma(e),
                    _ => SmootherParams::brown(e),
                })
                .collect(),
            _ => config("exactly one of engine.nu and engine.eta must be given"),
        }?;
        if list.is_empty() {
            return config("empty smoothing grid");
        }
        Ok(list)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(deserialize_with = "method_ids")]
    pub methods: Vec<Method>,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    /// Power is evaluated for `t > power_start`; defaults to `t1`.
    pub power_start: Option<u64>,
    /// Metrics CSV; the power file goes next to it.
    pub output: Option<PathBuf>,
    /// Mixture parameter of `ws`; `1/sqrt(nu)` when absent.
    pub ws_rho_mix: Option<f64>,
    /// Variance smoothing rate of `ws`; the smoother's rate when absent.
    pub ws_variance_eta: Option<f64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dgp: DgpSection,
    pub engine: EngineSection,
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn power_start(&self) -> u64 {
        self.experiment.power_start.unwrap_or(self.engine.t1)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.engine;
        let x = &self.experiment;
        if x.replications == 0 {
            return config("replications must be at least 1");
        }
        if x.methods.is_empty() {
            return config("no methods selected");
        }
        if self.power_start() < e.t1 || self.power_start() >= e.t2 {
            return config(format!("power_start must lie in [t1, t2), got {}", self.power_start()));
        }
        if let Some(r) = x.ws_rho_mix {
            if !(r > 0.0) {
                return config("ws_rho_mix must be positive");
            }
        }
        if x.threads == Some(0) {
            return config("threads must be at least 1");
        }
        self.dgp.expand()?;
        for s in e.smoothers()? {
            crate::engine::EngineConfig::new(s, e.alpha, e.t0, e.t1, e.t2, e.b1, e.b2).with_chi(e.chi).validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[dgp]
preset = "trend_seasonal"
phi = 0.6
a = [0.0, 0.0005]

[engine]
alpha = 0.1
nu = [30, 50]
t0 = 500
t1 = 900
t2 = 3500
b1 = 40
b2 = 160

[experiment]
methods = ["ours", "ws"]
replications = 150
seed = 7
"#;

    #[test]
    fn parses_grids() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.experiment.methods, vec![Method::Ours, Method::Ws]);
        assert_eq!(cfg.power_start(), 900);
        let dgps = cfg.dgp.expand().unwrap();
        assert_eq!(dgps.len(), 2);
        assert_eq!((dgps[1].a, dgps[1].amp, dgps[1].phi), (0.0005, 0.4, 0.6));
        let s = cfg.engine.smoothers().unwrap();
        assert_eq!(s, vec![SmootherParams::ewma(2.0 / 31.0).unwrap(), SmootherParams::ewma(2.0 / 51.0).unwrap()]);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_documents() {
        let cases = [
            BASE.replace("seed = 7", "seed = 7\nspeed = 1"),
            BASE.replace("\"ws\"", "\"conformal\""),
            BASE.replace("replications = 150", "replications = 0"),
            BASE.replace("nu = [30, 50]", "nu = [30]\neta = [0.1]"),
            BASE.replace("phi = 0.6", "phi = 1.0"),
            BASE.replace("t1 = 900", "t1 = 400"),
            BASE.replace("seed = 7", "seed = 7\npower_start = 800"),
            BASE.replace("alpha = 0.1", "alpha = 0.1\nsmoother = \"holt_winters\""),
        ];
        for doc in cases {
            assert!(ExperimentConfig::from_toml(&doc).is_err(), "{doc}");
        }
    }
}
