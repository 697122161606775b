use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use trendband::baselines::{iid_engine_config, AsympCsConfig, AsympCsState};
use trendband::dgp::{simulate, write_series_csv, DgpParams, DgpPreset, Innovation};
use trendband::engine::{Engine, EngineConfig};
use trendband::harness::{run_experiment, run_selftest, write_metrics_csv, write_outputs, ExperimentConfig, Method};
use trendband::multipliers::{TransformKind, DEFAULT_CHI};
use trendband::smoothers::{effective_sample_size, Smoother, SmootherKind, SmootherParams};
use trendband::{Error, Result};

#[derive(Parser)]
#[command(name = "trendband", version, about = "Online bootstrap bands for smoothed trends")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a simulated series as t,x,m CSV.
    Simulate(SimulateArgs),
    /// Stream a series through one method and write t,level,lo,hi.
    Band(BandArgs),
    /// Run a Monte Carlo experiment from a TOML config.
    Run(RunArgs),
    /// Check special functions and the bootstrap recursion against stored values.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Stationary,
    TrendSeasonal,
    TrendShocks,
}

impl From<PresetArg> for DgpPreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Stationary => DgpPreset::Stationary,
            PresetArg::TrendSeasonal => DgpPreset::TrendSeasonal,
            PresetArg::TrendShocks => DgpPreset::TrendShocks,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "stationary")]
    preset: PresetArg,
    #[arg(long, default_value_t = 0.3)]
    phi: f64,
    #[arg(long, default_value_t = 3500)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trend slope override.
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Standardized Student-t innovations with this many degrees of freedom.
    #[arg(long)]
    t_df: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SmootherArg {
    Ewma,
    Brown,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformArg {
    StudentT,
    StandardT,
    Identity,
}

#[derive(Args)]
struct BandArgs {
    /// Input file, or `-` for standard input.
    #[arg(long, short, default_value = "-")]
    input: String,
    #[arg(long, default_value = "ours", value_parser = parse_method)]
    method: Method,
    #[arg(long, value_enum, default_value = "ewma")]
    smoother: SmootherArg,
    /// Effective sample size (alternative to --eta).
    #[arg(long, conflicts_with = "eta")]
    nu: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 500)]
    t0: u64,
    #[arg(long, default_value_t = 900)]
    t1: u64,
    /// Horizon; defaults to the input length (which then buffers the input).
    #[arg(long)]
    t2: Option<u64>,
    #[arg(long, default_value_t = 40)]
    b1: usize,
    #[arg(long, default_value_t = 160)]
    b2: usize,
    #[arg(long, default_value_t = DEFAULT_CHI)]
    chi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "student-t")]
    transform: TransformArg,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    Method::parse(s).map_err(|e| e.to_string())
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Metrics CSV path; the power table is written beside it.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, env = "TRENDBAND_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Band(a) => cmd_band(a),
        Command::Run(a) => cmd_run(a),
        Command::Selftest => cmd_selftest(),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("trendband: error: {e}");
            ExitCode::from(2)
        }
    }
}

fn sink(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_simulate(a: SimulateArgs) -> Result<ExitCode> {
    let mut p = DgpParams::preset(a.preset.into(), a.phi);
    if let Some(v) = a.a {
        p.a = v;
    }
    if let Some(v) = a.sigma {
        p.sigma = v;
    }
    if let Some(df) = a.t_df {
        p.innovation = Innovation::StandardizedT { df };
    }
    let sim = simulate(&p, a.n, a.seed)?;
    let mut out = sink(a.output.as_ref())?;
    write_series_csv(&mut out, &sim)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

/// Observations from lines holding either one number or `t,x[,m]`. A
/// non-numeric first line is taken as a header.
struct Observations<R> {
    lines: io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Iterator for Observations<R> {
    type Item = Result<f64>;

    fn next(&mut self) -> Option<Result<f64>> {
        loop {
            let raw = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line += 1;
            let text = raw.trim();
            if text.is_empty() {
                continue;
            }
            let fields: Vec<&str> = text.split(',').map(str::trim).collect();
            let field = match fields.len() {
                1 => fields[0],
                2 | 3 => fields[1],
                n => return Some(Err(Error::Data(format!("line {}: expected 1 to 3 fields, found {n}", self.line)))),
            };
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => return Some(Ok(v)),
                Ok(v) => return Some(Err(Error::Data(format!("line {}: non-finite value {v}", self.line)))),
                Err(_) if self.line == 1 => continue,
                Err(_) => return Some(Err(Error::Data(format!("line {}: cannot parse {field:?}", self.line)))),
            }
        }
    }
}

fn observations(input: &str) -> Result<Observations<Box<dyn BufRead>>> {
    let reader: Box<dyn BufRead> = if input == "-" {
        Box::new(BufReader::new(io::stdin()))
    } else {
        Box::new(BufReader::new(
            File::open(input).map_err(|e| Error::Data(format!("cannot open {input}: {e}")))?,
        ))
    };
    Ok(Observations { lines: reader.lines(), line: 0 })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cmd_band(a: BandArgs) -> Result<ExitCode> {
    let kind = match a.smoother {
        SmootherArg::Ewma => SmootherKind::Ewma,
        SmootherArg::Brown => SmootherKind::BrownDouble,
    };
    let params = match (a.nu, a.eta) {
        (Some(nu), _) => SmootherParams::for_effective_sample_size(kind, nu)?,
        (None, Some(eta)) if matches!(kind, SmootherKind::Ewma) => SmootherParams::ewma(eta)?,
        (None, Some(eta)) => SmootherParams::brown(eta)?,
        (None, None) => return Err(Error::Config("one of --nu or --eta is required".into())),
    };

    let mut obs = observations(&a.input)?;
    let (mut buffered, t2) = match a.t2 {
        Some(t2) => (Vec::new(), t2),
        None => {
            let all = obs.by_ref().collect::<Result<Vec<f64>>>()?;
            let n = all.len() as u64;
            (all, n)
        }
    };
    let mut source: Box<dyn Iterator<Item = Result<f64>>> = if a.t2.is_some() {
        Box::new(obs)
    } else {
        Box::new(std::mem::take(&mut buffered).into_iter().map(Ok))
    };

    let mut out = sink(a.output.as_ref())?;
    writeln!(out, "t,level,lo,hi")?;
    match a.method {
        Method::Ws => {
            let nu = effective_sample_size(&params)?;
            let eta = match params {
                SmootherParams::Ewma { eta } | SmootherParams::Brown { eta } => eta,
                SmootherParams::HoltWinters { eta, .. } => eta[0],
            };
            let cfg = AsympCsConfig::with_defaults(a.alpha, nu, eta)?;
            let mut sm = Smoother::new(params)?;
            let mut st = AsympCsState::default();
            for (k, x) in source.enumerate() {
                let x = x?;
                let h = st.step(&cfg, x, sm.level())?;
                let level = sm.update(x)?;
                writeln!(out, "{},{level},{},{}", k + 1, level - h, level + h)?;
            }
        }
        Method::Ours | Method::Iid => {
            let transform = match a.transform {
                TransformArg::StudentT => TransformKind::StudentT,
                TransformArg::StandardT => TransformKind::StandardT,
                TransformArg::Identity => TransformKind::Identity,
            };
            let mut cfg = EngineConfig::new(params, a.alpha, a.t0, a.t1, t2, a.b1, a.b2)
                .with_chi(a.chi)
                .with_seed(a.seed)
                .with_transform(transform);
            if matches!(a.method, Method::Iid) {
                cfg = iid_engine_config(cfg);
            }
            cfg.validate()?;
            let mut warm = Vec::with_capacity(a.t0 as usize);
            let mut sm = Smoother::new(params)?;
            while warm.len() < a.t0 as usize {
                let x = source.next().ok_or_else(|| Error::Data(format!("input shorter than t0 = {}", a.t0)))??;
                warm.push(x);
                writeln!(out, "{},{},,", warm.len(), sm.update(x)?)?;
            }
            let mut engine = Engine::new(cfg, &warm)?;
            for x in source.by_ref() {
                let s = engine.step(x?)?;
                writeln!(out, "{},{},{},{}", s.t, s.level, fmt_opt(s.lower()), fmt_opt(s.upper()))?;
            }
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(r) = a.replications {
        cfg.experiment.replications = r;
    }
    if let Some(s) = a.seed {
        cfg.experiment.seed = s;
    }
    if a.output.is_some() {
        cfg.experiment.output = a.output;
    }
    if a.threads.is_some() {
        cfg.experiment.threads = a.threads;
    }
    cfg.validate()?;
    let rows = run_experiment(&cfg)?;
    match &cfg.experiment.output {
        Some(path) => {
            let (m, p) = write_outputs(&rows, path)?;
            eprintln!("wrote {} and {}", m.display(), p.display());
        }
        None => {
            let mut out = sink(None)?;
            write_metrics_csv(&mut out, &rows)?;
            out.flush()?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_selftest() -> Result<ExitCode> {
    let checks = run_selftest();
    let mut ok = true;
    for c in &checks {
        println!("{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
