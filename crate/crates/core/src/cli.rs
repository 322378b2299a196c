//! Command-line driver: simulate, fit, evaluate, predict, moments, baseline-dx.
//!
//! Settings come from a TOML file (`--config`) with optional sections
//! `[data]`, `[simulation]`, `[chain]`, `[prior]`, `[moments]`, `[predict]`,
//! `[evaluate]` and `[dx]`; flags override the file. Relative paths in the
//! file are resolved against its directory, and outputs go to `--out`
//! (default: the config directory, or the working directory without one).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::baselines::{dx_rho_estimates, fit_static_dx_per_time, independence_baseline, independence_replicates, StaticDxConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::experiments::{
    evaluate_rho_recovery, forecast_table, generate_loglinear_rw, generate_model_based, mixture_rho, predictive_criteria,
    CountTable, PredictiveCriteria, SimulationCase, SimulationSpec,
};
use crate::io;
use crate::link::LinkFunction;
use crate::model::{CategoricalSchema, DirichletHyper};
use crate::moments::prior_moments;
use crate::sampler::{run_chains, ChainConfig, ChainDiagnostics, PriorConfig};
use crate::stick::StateHyper;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dynparafac", version, about = "Dynamic Parafac mixtures for time-indexed categorical data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with its true rho values.
    Simulate(Flags),
    /// Fit the dynamic model and write draws and rho summaries.
    Fit(Flags),
    /// Correlate estimated rho values with the truth.
    Evaluate(Flags),
    /// Hold out the last wave, forecast it and compare with the independence baseline.
    Predict(Flags),
    /// Report prior moments of cell probabilities.
    Moments(Flags),
    /// Fit the static per-wave baseline and write its rho estimates.
    BaselineDx(Flags),
}

#[derive(Debug, Args, Clone, Default)]
pub struct Flags {
    /// TOML configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for the chain and the simulation
    #[arg(long)]
    pub seed: Option<u64>,
    /// Total sweeps per chain
    #[arg(long)]
    pub iters: Option<usize>,
    /// Sweeps discarded before recording
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Keep every n-th sweep after burn-in
    #[arg(long)]
    pub thin: Option<usize>,
    /// Output directory (default: the config directory)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of chains, run with streams 0..n
    #[arg(long)]
    pub chains: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub codebook: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub link: LinkFunction,
    pub initial_components: usize,
    pub max_components: usize,
    pub record_tolerance: f64,
}

impl Default for ChainSection {
    fn default() -> Self {
        let c = ChainConfig::default();
        ChainSection {
            iterations: c.iterations,
            burn_in: c.burn_in,
            thin: c.thin,
            seed: c.seed,
            chains: 1,
            link: c.link,
            initial_components: c.initial_components,
            max_components: c.max_components,
            record_tolerance: c.record_tolerance,
        }
    }
}

/// Prior moment report settings; cells are one-based.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsSection {
    pub levels: Vec<usize>,
    pub dirichlet_a: f64,
    pub mu: f64,
    pub phi: f64,
    pub sigma_eps: f64,
    pub sigma_eta: f64,
    pub link: LinkFunction,
    pub cell: Vec<usize>,
    pub other: Vec<usize>,
    pub lags: Vec<usize>,
}

impl Default for MomentsSection {
    fn default() -> Self {
        MomentsSection {
            levels: vec![2, 3],
            dirichlet_a: 1.0,
            mu: 0.0,
            phi: 0.5,
            sigma_eps: 0.3,
            sigma_eta: 0.5,
            link: LinkFunction::Probit,
            cell: vec![1, 1],
            other: vec![2, 3],
            lags: vec![0, 1, 2],
        }
    }
}

/// Forecast settings; `margin` lists one-based variables, empty meaning all.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    pub horizon: usize,
    pub margin: Vec<usize>,
}

impl Default for PredictSection {
    fn default() -> Self {
        PredictSection {
            horizon: 1,
            margin: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub truth: PathBuf,
    pub estimates: PathBuf,
    /// Optional second set of estimates, typically the static baseline.
    pub baseline: Option<PathBuf>,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            truth: "truth_rho.csv".into(),
            estimates: "rho_summary.csv".into(),
            baseline: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DxSection {
    pub alpha: f64,
}

impl Default for DxSection {
    fn default() -> Self {
        DxSection { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataSection,
    pub simulation: SimulationSpec,
    pub chain: ChainSection,
    pub prior: PriorConfig,
    pub moments: MomentsSection,
    pub predict: PredictSection,
    pub evaluate: EvaluateSection,
    pub dx: DxSection,
}

/// Parsed configuration with flags applied and paths resolved.
struct Context {
    config: Config,
    base: PathBuf,
    out: PathBuf,
}

impl Context {
    fn load(flags: &Flags) -> Result<Self> {
        let (mut config, base) = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Validation(format!("cannot read config {}: {e}", path.display())))?;
                let config: Config = toml::from_str(&text)
                    .map_err(|e| Error::Validation(format!("config {}: {e}", path.display())))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (config, base)
            }
            None => (Config::default(), PathBuf::new()),
        };
        if let Some(v) = flags.iters {
            config.chain.iterations = v;
        }
        if let Some(v) = flags.burnin {
            config.chain.burn_in = v;
        }
        if let Some(v) = flags.thin {
            config.chain.thin = v;
        }
        if let Some(v) = flags.chains {
            config.chain.chains = v;
        }
        if let Some(v) = flags.seed {
            config.chain.seed = v;
            config.simulation.seed = v;
        }
        let out = flags.out.clone().unwrap_or_else(|| base.clone());
        Ok(Context { config, base, out })
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base.join(path)
        }
    }

    fn output(&self, name: &str) -> Result<PathBuf> {
        if !self.out.as_os_str().is_empty() {
            fs::create_dir_all(&self.out)?;
        }
        Ok(self.out.join(name))
    }

    fn chain_config(&self) -> Result<ChainConfig> {
        let c = &self.config.chain;
        if c.chains == 0 {
            return Err(Error::Validation("at least one chain is required".into()));
        }
        let config = ChainConfig {
            iterations: c.iterations,
            burn_in: c.burn_in,
            thin: c.thin,
            seed: c.seed,
            link: c.link,
            prior: self.config.prior,
            initial_components: c.initial_components,
            max_components: c.max_components,
            record_tolerance: c.record_tolerance,
            initial_hyper: None,
        };
        config.validate()?;
        Ok(config)
    }

    fn load_data(&self) -> Result<Dataset> {
        let section = &self.config.data;
        let path = self.resolve(section.path.as_deref().unwrap_or(Path::new("data.csv")));
        let book = self.resolve(section.codebook.as_deref().unwrap_or(Path::new("codebook.toml")));
        let codebook = io::load_codebook(&book)?;
        io::load_dataset(&path, &codebook)
    }
}

/// Parses `args` (program name first) and runs; returns the exit status.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match run(&cli.command) {
        Ok(report) => {
            print!("{report}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Numeric breakdown exits with 2; every other failure is a usage or input problem.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numeric() {
        EXIT_NUMERIC
    } else {
        EXIT_INVALID
    }
}

/// Runs a subcommand and returns the text it prints.
pub fn run(command: &Command) -> Result<String> {
    match command {
        Command::Simulate(f) => simulate(&Context::load(f)?),
        Command::Fit(f) => fit(&Context::load(f)?),
        Command::Evaluate(f) => evaluate(&Context::load(f)?),
        Command::Predict(f) => predict(&Context::load(f)?),
        Command::Moments(f) => moments(&Context::load(f)?),
        Command::BaselineDx(f) => baseline_dx(&Context::load(f)?),
    }
}

fn simulate(cx: &Context) -> Result<String> {
    let spec = &cx.config.simulation;
    let (data, truth) = match spec.case {
        SimulationCase::ModelBased => {
            let (data, mixture) = generate_model_based(spec)?;
            (data, mixture_rho(&mixture)?)
        }
        SimulationCase::LoglinearRw => {
            let (data, truth) = generate_loglinear_rw(spec)?;
            (data, truth.rho()?)
        }
    };
    let codebook = io::Codebook::from_schema(data.schema());
    io::write_dataset(&data, &codebook, &cx.output("data.csv")?)?;
    io::write_codebook(&codebook, &cx.output("codebook.toml")?)?;
    io::write_rho_values(&truth, &cx.output("truth_rho.csv")?)?;
    Ok(format!(
        "simulated {} waves, {} subjects, {} variables\n",
        data.num_times(),
        data.total_subjects(),
        data.schema().num_vars()
    ))
}

fn format_diagnostics(diags: &[ChainDiagnostics]) -> String {
    let mut out = String::from("chain,sweep,kstar,instantiated\n");
    for d in diags {
        for (s, (k, n)) in d.kstar.iter().zip(&d.instantiated).enumerate() {
            writeln!(out, "{},{},{k},{n}", d.chain, s + 1).expect("string write");
        }
    }
    out
}

fn format_acceptance(diags: &[ChainDiagnostics]) -> String {
    let mut out = String::from("chain,phi_accepted,phi_proposed,w_accepted,w_proposed\n");
    for d in diags {
        writeln!(
            out,
            "{},{},{},{},{}",
            d.chain, d.phi_acceptance.accepted, d.phi_acceptance.proposed, d.w_acceptance.accepted, d.w_acceptance.proposed
        )
        .expect("string write");
    }
    out
}

fn fit(cx: &Context) -> Result<String> {
    let config = cx.chain_config()?;
    let data = cx.load_data()?;
    let (draws, diags) = run_chains(&data, &config, cx.config.chain.chains)?;
    io::write_draws(&draws, &cx.output("draws.csv")?)?;
    io::write_rho_summary(&draws, None, &cx.output("rho_summary.csv")?)?;
    fs::write(cx.output("diagnostics.csv")?, format_diagnostics(&diags))?;
    fs::write(cx.output("acceptance.csv")?, format_acceptance(&diags))?;
    let last_k: Vec<String> = diags
        .iter()
        .map(|d| d.kstar.last().copied().unwrap_or(0).to_string())
        .collect();
    Ok(format!(
        "retained {} draws from {} chain(s); final k* {}\n",
        draws.len(),
        diags.len(),
        last_k.join(" ")
    ))
}

fn evaluate(cx: &Context) -> Result<String> {
    let section = &cx.config.evaluate;
    let truth = io::read_rho_values(&cx.resolve(&section.truth))?;
    let estimates = io::read_rho_values(&cx.resolve(&section.estimates))?;
    let table = evaluate_rho_recovery(&estimates, &truth)?;
    fs::write(cx.output("rho_recovery.csv")?, io::format_recovery(&table))?;
    let show = |c: Option<f64>| c.map_or_else(|| "undefined".to_string(), |c| format!("{c:.4}"));
    let mut report = format!("pooled correlation {}\n", show(table.pooled));
    if let Some(path) = &section.baseline {
        let baseline = io::read_rho_values(&cx.resolve(path))?;
        let other = evaluate_rho_recovery(&baseline, &truth)?;
        fs::write(cx.output("rho_recovery_baseline.csv")?, io::format_recovery(&other))?;
        writeln!(report, "baseline pooled correlation {}", show(other.pooled)).expect("string write");
    }
    Ok(report)
}

fn one_based(indices: &[usize], bound: usize, what: &str) -> Result<Vec<usize>> {
    indices
        .iter()
        .map(|&i| {
            if i == 0 || i > bound {
                Err(Error::Validation(format!("{what} {i} outside 1..={bound}")))
            } else {
                Ok(i - 1)
            }
        })
        .collect()
}

fn predict(cx: &Context) -> Result<String> {
    let config = cx.chain_config()?;
    let data = cx.load_data()?;
    let times = data.num_times();
    if times < 2 {
        return Err(Error::Validation("prediction needs at least two waves".into()));
    }
    let section = &cx.config.predict;
    if section.horizon == 0 {
        return Err(Error::Validation("predict horizon must be at least 1".into()));
    }
    let p = data.schema().num_vars();
    let margin = if section.margin.is_empty() {
        (0..p).collect()
    } else {
        one_based(&section.margin, p, "margin variable")?
    };
    let fitted = data.head(times - 1)?;
    let held_out = data.block(times - 1);
    let observed = CountTable::from_block(held_out, margin.clone());
    let n = held_out.num_subjects();
    let (draws, _) = run_chains(&fitted, &config, cx.config.chain.chains)?;
    let replicates = forecast_table(&draws, section.horizon, n, &margin, config.seed)?;
    let forecast = predictive_criteria(&replicates, &observed)?;
    let marginals = independence_baseline(fitted.block(times - 2), data.schema())?;
    let baseline = independence_replicates(&marginals, n, &margin, replicates.len(), config.seed)?;
    let independence = predictive_criteria(&baseline, &observed)?;
    let mut out = String::from("method,replicate,ad,mape\n");
    let mut push = |name: &str, c: &PredictiveCriteria| {
        for (i, (a, m)) in c.ad.iter().zip(&c.mape).enumerate() {
            writeln!(out, "{name},{i},{},{}", io::format_number(*a), io::format_number(*m)).expect("string write");
        }
    };
    push("forecast", &forecast);
    push("independence", &independence);
    fs::write(cx.output("predictive.csv")?, out)?;
    let summary = format!(
        "method,mean_ad,mean_mape\nforecast,{},{}\nindependence,{},{}\n",
        io::format_number(forecast.mean_ad),
        io::format_number(forecast.mean_mape),
        io::format_number(independence.mean_ad),
        io::format_number(independence.mean_mape)
    );
    fs::write(cx.output("predictive_summary.csv")?, &summary)?;
    Ok(format!(
        "forecast AD {:.2} MAPE {:.4}; independence AD {:.2} MAPE {:.4}\n",
        forecast.mean_ad, forecast.mean_mape, independence.mean_ad, independence.mean_mape
    ))
}

fn moments(cx: &Context) -> Result<String> {
    let m = &cx.config.moments;
    let schema = CategoricalSchema::new(m.levels.clone())?;
    let hyper = DirichletHyper::symmetric(&schema, m.dirichlet_a)?;
    let state = StateHyper::from_sds(m.mu, m.phi, m.sigma_eps, m.sigma_eta)
        .map_err(|e| Error::Validation(e.to_string()))?;
    let check = |cell: &[usize], what: &str| -> Result<Vec<usize>> {
        if cell.len() != schema.num_vars() {
            return Err(Error::Validation(format!("{what} needs one level per variable")));
        }
        cell.iter()
            .zip(schema.levels())
            .map(|(&c, &d)| one_based(&[c], d, what).map(|v| v[0]))
            .collect()
    };
    let cell = check(&m.cell, "cell")?;
    let other = check(&m.other, "other")?;
    let mut out = String::from("lag,expectation,variance,covariance_same,covariance_other,beta1,beta2,gamma\n");
    for &lag in &m.lags {
        let same = prior_moments(&hyper, &state, m.link, &cell, &cell, lag)?;
        let cross = prior_moments(&hyper, &state, m.link, &cell, &other, lag)?;
        writeln!(
            out,
            "{lag},{},{},{},{},{},{},{}",
            io::format_number(same.expectation),
            io::format_number(same.variance),
            io::format_number(same.covariance),
            io::format_number(cross.covariance),
            io::format_number(same.beta1),
            io::format_number(same.beta2),
            io::format_number(same.gamma)
        )
        .expect("string write");
    }
    fs::write(cx.output("moments.csv")?, &out)?;
    Ok(out)
}

fn baseline_dx(cx: &Context) -> Result<String> {
    let config = StaticDxConfig {
        chain: cx.chain_config()?,
        alpha: cx.config.dx.alpha,
    };
    config.validate()?;
    let data = cx.load_data()?;
    let fits = fit_static_dx_per_time(&data, &config)?;
    let estimates = dx_rho_estimates(&fits)?;
    io::write_rho_values(&estimates, &cx.output("dx_rho.csv")?)?;
    Ok(format!("fitted {} waves\n", fits.len()))
}
