//! Monte Carlo experiments: simulate, run each method on matched data,
//! score the bands and write CSV tables.

mod config;
mod metrics;
mod selftest;

pub use config::{DgpSection, EngineSection, ExperimentConfig, ExperimentSection, Grid, Method};
pub use metrics::{jump_transform, mc_stderr, power_curve, uniform_coverage};
pub use selftest::{run_selftest, Check};

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::baselines::{iid_engine_config, AsympCsConfig, AsympCsState};
use crate::dgp::{simulate, true_smoothed_mean, DgpParams};
use crate::engine::{Engine, EngineConfig};
use crate::error::{Error, Result};
use crate::multipliers::{transform_dof, Transform};
use crate::numerics::rng::derive_seed;
use crate::smoothers::{effective_sample_size, Smoother, SmootherParams};

/// Version written in the first column of the metrics file.
pub const METRICS_SCHEMA: u32 = 1;

/// Per-replication result of one method on one series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    /// Band missed the smoothed mean somewhere in `(t1, t2]`.
    pub exceeded: bool,
    /// Mean of `2 * halfwidth` over `(t1, t2]`.
    pub mean_width: f64,
    /// First `t > power_start` with `|level| > halfwidth`.
    pub first_reject: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub method: Method,
    pub dgp: String,
    pub phi: f64,
    pub a: f64,
    pub nu: f64,
    pub eta: f64,
    pub replications: usize,
    pub uniform_coverage: f64,
    pub mc_stderr: f64,
    pub avg_width: f64,
    /// `(t, fraction rejected by t)` for `t` in `(power_start, t2]`.
    pub power_curve: Vec<(u64, f64)>,
}

impl MetricsRow {
    /// Rejection frequency by `t2`.
    pub fn final_power(&self) -> f64 {
        self.power_curve.last().map_or(0.0, |p| p.1)
    }
}

struct Prepared {
    params: SmootherParams,
    nu: f64,
    eta: f64,
    ours: EngineConfig,
    iid: EngineConfig,
    transform: Transform,
    ws: AsympCsConfig,
}

struct Plan {
    dgps: Vec<DgpParams>,
    smoothers: Vec<Prepared>,
    methods: Vec<Method>,
    seed: u64,
    t1: u64,
    t2: u64,
    power_start: u64,
}

fn eta_of(params: &SmootherParams) -> f64 {
    match params {
        SmootherParams::Ewma { eta } | SmootherParams::Brown { eta } => *eta,
        SmootherParams::HoltWinters { eta, .. } => eta[0],
    }
}

impl Plan {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let e = &cfg.engine;
        let x = &cfg.experiment;
        let mut smoothers = Vec::new();
        for params in e.smoothers()? {
            let ours = EngineConfig::new(params, e.alpha, e.t0, e.t1, e.t2, e.b1, e.b2)
                .with_chi(e.chi)
                .with_transform(e.transform);
            let nu = effective_sample_size(&params)?;
            let eta = eta_of(&params);
            let transform = e.transform.build(transform_dof(nu.get())?);
            let rho_mix = x.ws_rho_mix.unwrap_or(1.0 / nu.get().sqrt());
            let ws = AsympCsConfig::new(e.alpha, rho_mix, nu, x.ws_variance_eta.unwrap_or(eta))?;
            smoothers.push(Prepared {
                params,
                nu: nu.get(),
                eta,
                iid: iid_engine_config(ours.clone()),
                ours,
                transform,
                ws,
            });
        }
        Ok(Self {
            dgps: cfg.dgp.expand()?,
            smoothers,
            methods: x.methods.clone(),
            seed: x.seed,
            t1: e.t1,
            t2: e.t2,
            power_start: cfg.power_start(),
        })
    }

    fn cells(&self) -> usize {
        self.dgps.len() * self.smoothers.len() * self.methods.len()
    }

    /// Outcomes ordered dgp-major, then smoother, then method.
    fn replication(&self, rep: u64) -> Result<Vec<RunOutcome>> {
        let data_seed = derive_seed(self.seed, &[rep, 0]);
        let engine_seed = derive_seed(self.seed, &[rep, 1]);
        let mut out = Vec::with_capacity(self.cells());
        for dgp in &self.dgps {
            let sim = simulate(dgp, self.t2 as usize, data_seed)?;
            for s in &self.smoothers {
                let target = true_smoothed_mean(&s.params, &sim.m)?;
                for m in &self.methods {
                    let score = Scorer::new(&target, self.t1, self.power_start);
                    let o = match m {
                        Method::Ours => run_engine(&s.ours, engine_seed, &s.transform, &sim.x, score)?,
                        Method::Iid => run_engine(&s.iid, engine_seed, &s.transform, &sim.x, score)?,
                        Method::Ws => run_ws(&s.params, &s.ws, &sim.x, score)?,
                    };
                    out.push(o);
                }
            }
        }
        Ok(out)
    }
}

struct Scorer<'a> {
    target: &'a [f64],
    t1: u64,
    power_start: u64,
    exceeded: bool,
    width: f64,
    count: u64,
    first: Option<u64>,
}

impl<'a> Scorer<'a> {
    fn new(target: &'a [f64], t1: u64, power_start: u64) -> Self {
        Self { target, t1, power_start, exceeded: false, width: 0.0, count: 0, first: None }
    }

    fn observe(&mut self, t: u64, level: f64, halfwidth: Option<f64>) -> Result<()> {
        if t <= self.t1 {
            return Ok(());
        }
        let h = halfwidth.ok_or(Error::NotCalibrated { t1: self.t1 })?;
        self.exceeded |= (level - self.target[t as usize - 1]).abs() > h;
        self.width += 2.0 * h;
        self.count += 1;
        if self.first.is_none() && t > self.power_start && level.abs() > h {
            self.first = Some(t);
        }
        Ok(())
    }

    fn finish(self) -> RunOutcome {
        RunOutcome { exceeded: self.exceeded, mean_width: self.width / self.count as f64, first_reject: self.first }
    }
}

fn run_engine(cfg: &EngineConfig, seed: u64, transform: &Transform, x: &[f64], mut score: Scorer) -> Result<RunOutcome> {
    let t0 = cfg.t0 as usize;
    let mut engine = Engine::with_transform(cfg.clone().with_seed(seed), &x[..t0], transform.clone())?;
    for &v in &x[t0..] {
        let out = engine.step(v)?;
        score.observe(out.t, out.level, out.halfwidth)?;
    }
    Ok(score.finish())
}

fn run_ws(params: &SmootherParams, cfg: &AsympCsConfig, x: &[f64], mut score: Scorer) -> Result<RunOutcome> {
    let mut smoother = Smoother::new(*params)?;
    let mut state = AsympCsState::default();
    for (k, &v) in x.iter().enumerate() {
        let h = state.step(cfg, v, smoother.level())?;
        let level = smoother.update(v)?;
        score.observe(k as u64 + 1, level, Some(h))?;
    }
    Ok(score.finish())
}

/// Runs every replication (in parallel when a thread pool is available) and
/// aggregates in replication order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    let plan = Plan::new(cfg)?;
    let reps = cfg.experiment.replications;
    let work = || (0..reps as u64).into_par_iter().map(|r| plan.replication(r)).collect::<Result<Vec<_>>>();
    let results = match cfg.experiment.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };

    let mut rows = Vec::with_capacity(plan.cells());
    let mut cell = 0;
    for dgp in &plan.dgps {
        for s in &plan.smoothers {
            for &method in &plan.methods {
                let outcomes: Vec<RunOutcome> = results.iter().map(|r| r[cell]).collect();
                cell += 1;
                let flags: Vec<bool> = outcomes.iter().map(|o| o.exceeded).collect();
                let firsts: Vec<Option<u64>> = outcomes.iter().map(|o| o.first_reject).collect();
                let coverage = uniform_coverage(&flags)?;
                rows.push(MetricsRow {
                    method,
                    dgp: cfg.dgp.preset.name().to_string(),
                    phi: dgp.phi,
                    a: dgp.a,
                    nu: s.nu,
                    eta: s.eta,
                    replications: reps,
                    uniform_coverage: coverage,
                    mc_stderr: mc_stderr(coverage, reps),
                    avg_width: outcomes.iter().map(|o| o.mean_width).sum::<f64>() / reps as f64,
                    power_curve: power_curve(&firsts, plan.power_start + 1..=plan.t2)?,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_metrics_csv<W: Write>(mut out: W, rows: &[MetricsRow]) -> Result<()> {
    writeln!(out, "schema,method,dgp,phi,a,nu,eta,replications,coverage,mc_stderr,avg_width,power_final")?;
    for r in rows {
        writeln!(
            out,
            "{METRICS_SCHEMA},{},{},{},{},{},{},{},{},{},{},{}",
            r.method.id(),
            r.dgp,
            r.phi,
            r.a,
            r.nu,
            r.eta,
            r.replications,
            r.uniform_coverage,
            r.mc_stderr,
            r.avg_width,
            r.final_power()
        )?;
    }
    Ok(())
}

/// Long format: one line per method, cell and time.
pub fn write_power_csv<W: Write>(mut out: W, rows: &[MetricsRow]) -> Result<()> {
    writeln!(out, "method,dgp,phi,a,nu,t,fraction")?;
    for r in rows {
        for (t, f) in &r.power_curve {
            writeln!(out, "{},{},{},{},{},{t},{f}", r.method.id(), r.dgp, r.phi, r.a, r.nu)?;
        }
    }
    Ok(())
}

/// `metrics.csv` -> `metrics_power.csv`.
pub fn power_path(metrics: &Path) -> PathBuf {
    let stem = metrics.file_stem().and_then(|s| s.to_str()).unwrap_or("metrics");
    metrics.with_file_name(format!("{stem}_power.csv"))
}

/// Writes both tables; returns the two paths.
pub fn write_outputs(rows: &[MetricsRow], metrics: &Path) -> Result<(PathBuf, PathBuf)> {
    if let Some(dir) = metrics.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let power = power_path(metrics);
    write_metrics_csv(std::io::BufWriter::new(std::fs::File::create(metrics)?), rows)?;
    write_power_csv(std::io::BufWriter::new(std::fs::File::create(&power)?), rows)?;
    Ok((metrics.to_path_buf(), power))
}
