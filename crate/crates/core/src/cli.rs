//! Command-line front-end. Each subcommand reads an optional JSON config,
//! applies flag overrides, validates everything, then writes versioned
//! output files into `--out`.
//!
//! Exit codes: 0 on success, 2 for configuration or validation errors,
//! 3 for numerical failures.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{batch_means, MomentReport};
use crate::chain::{simulate_chain, ChainConfig};
use crate::diffusion::{default_dt, simulate_diffusion, DiffusionConfig, Scheme};
use crate::error::{Error, Result};
use crate::export::{indexed_columns, write_json, CsvWriter, JsonlWriter};
use crate::generators::{gap_bound, mass_deficit_statistic, phi, sup_gap, GapReport};
use crate::kernel::KernelConfig;
use crate::oracle::{sample_pd_with, stationary_moment, StickBreakingConfig};
use crate::params::{Params, Regime};
use crate::rng;
use crate::sampler::MixtureSampler;
use crate::simplex::{sort_descending, DiscreteSimplexState, RankedState, SimplexState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Jsonl,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "wfpd", version, about = "Wright-Fisher construction of the two-parameter Poisson-Dirichlet diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the K-allele Wright-Fisher chain.
    SimulateChain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        chain: ChainFlags,
    },
    /// Integrate the K-dimensional diffusion.
    SimulateDiffusion {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        record_every: Option<u64>,
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<Scheme>,
        #[arg(long)]
        replicates: Option<u64>,
        /// Also write the ranked path.
        #[arg(long)]
        ranked: bool,
    },
    /// Sup-norm gap between the finite-K and limit generators across K.
    GeneratorGap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        m: Option<f64>,
        /// Comma-separated K values.
        #[arg(long, value_delimiter = ',')]
        k_values: Option<Vec<usize>>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Chain ergodic moments against the stationary moments.
    StationaryCompare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        chain: ChainFlags,
    },
    /// Draw ranked PD(theta, alpha) frequencies by stick-breaking.
    PdSample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        j: Option<usize>,
        #[arg(long)]
        draws: Option<usize>,
        /// Use the capped truncation instead of the strict residual rule.
        #[arg(long)]
        capped: bool,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Maximum number of replicates run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug, Args)]
struct ModelFlags {
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_parser = parse_regime)]
    regime: Option<Regime>,
}

#[derive(Debug, Args)]
struct ChainFlags {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    thin: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    match s {
        "normalized_cir" => Ok(Scheme::NormalizedCir),
        "euler_project" => Ok(Scheme::EulerProject),
        other => Err(format!("unknown scheme {other:?} (expected normalized_cir or euler_project)")),
    }
}

fn parse_regime(s: &str) -> std::result::Result<Regime, String> {
    match s {
        "general" => Ok(Regime::General),
        "theta_nonneg" => Ok(Regime::ThetaNonneg),
        other => Err(format!("unknown regime {other:?} (expected general or theta_nonneg)")),
    }
}

/// Runs the front-end on `args` (including the program name) and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::SimulateChain { common, model, chain } => {
            let mut cfg: ChainRun = load(&common)?;
            model.apply(&mut cfg.theta, &mut cfg.alpha, &mut cfg.regime);
            chain.apply(&mut cfg);
            common.apply(&mut cfg.seed, &mut cfg.format);
            let resolved = cfg.resolve()?;
            finish_config(&common, &resolved.echo)?.map_or(Ok(()), |out| simulate_chain_cmd(&resolved, &out, common.jobs))
        }
        Command::SimulateDiffusion {
            common,
            model,
            k,
            dt,
            t_end,
            record_every,
            scheme,
            replicates,
            ranked,
        } => {
            let mut cfg: DiffusionRun = load(&common)?;
            model.apply(&mut cfg.theta, &mut cfg.alpha, &mut cfg.regime);
            set(&mut cfg.k, k);
            if dt.is_some() {
                cfg.dt = dt;
            }
            set(&mut cfg.t_end, t_end);
            set(&mut cfg.record_every, record_every);
            set(&mut cfg.scheme, scheme);
            set(&mut cfg.replicates, replicates);
            cfg.ranked |= ranked;
            common.apply(&mut cfg.seed, &mut cfg.format);
            let resolved = cfg.resolve()?;
            finish_config(&common, &resolved.echo)?.map_or(Ok(()), |out| simulate_diffusion_cmd(&resolved, &out, common.jobs))
        }
        Command::GeneratorGap {
            common,
            model,
            m,
            k_values,
            samples,
        } => {
            let mut cfg: GapRun = load(&common)?;
            model.apply(&mut cfg.theta, &mut cfg.alpha, &mut cfg.regime);
            set(&mut cfg.m, m);
            set(&mut cfg.k_values, k_values);
            set(&mut cfg.samples, samples);
            common.apply(&mut cfg.seed, &mut cfg.format);
            let resolved = cfg.resolve()?;
            finish_config(&common, &resolved.echo)?.map_or(Ok(()), |out| generator_gap_cmd(&resolved, &out, common.jobs))
        }
        Command::StationaryCompare { common, model, chain } => {
            let mut cfg: CompareRun = load(&common)?;
            model.apply(&mut cfg.chain.theta, &mut cfg.chain.alpha, &mut cfg.chain.regime);
            chain.apply(&mut cfg.chain);
            common.apply(&mut cfg.chain.seed, &mut cfg.chain.format);
            let resolved = cfg.resolve()?;
            finish_config(&common, &resolved.echo)?.map_or(Ok(()), |out| stationary_compare_cmd(&resolved, &out, common.jobs))
        }
        Command::PdSample {
            common,
            model,
            j,
            draws,
            capped,
        } => {
            let mut cfg: PdRun = load(&common)?;
            model.apply(&mut cfg.theta, &mut cfg.alpha, &mut cfg.regime);
            set(&mut cfg.j, j);
            set(&mut cfg.draws, draws);
            cfg.capped |= capped;
            common.apply(&mut cfg.seed, &mut cfg.format);
            let resolved = cfg.resolve()?;
            finish_config(&common, &resolved.echo)?.map_or(Ok(()), |out| pd_sample_cmd(&resolved, &out, common.jobs))
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ModelFlags {
    fn apply(&self, theta: &mut f64, alpha: &mut f64, regime: &mut Regime) {
        set(theta, self.theta);
        set(alpha, self.alpha);
        set(regime, self.regime);
    }
}

impl ChainFlags {
    fn apply(&self, cfg: &mut ChainRun) {
        set(&mut cfg.k, self.k);
        set(&mut cfg.n, self.n);
        set(&mut cfg.steps, self.steps);
        if self.burn_in.is_some() {
            cfg.burn_in = self.burn_in;
        }
        if self.thin.is_some() {
            cfg.thin = self.thin;
        }
        set(&mut cfg.replicates, self.replicates);
    }
}

impl Common {
    fn apply(&self, seed: &mut u64, format: &mut Format) {
        set(seed, self.seed);
        set(format, self.format);
    }
}

fn load<T: DeserializeOwned + Default>(common: &Common) -> Result<T> {
    match &common.config {
        None => Ok(T::default()),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
        }
    }
}

/// Prints the effective config and returns `None` under `--print-config`;
/// otherwise creates the output directory.
fn finish_config(common: &Common, echo: &Value) -> Result<Option<PathBuf>> {
    if common.print_config {
        println!("{}", serde_json::to_string_pretty(echo)?);
        return Ok(None);
    }
    if common.jobs == 0 {
        return Err(Error::InvalidConfig("--jobs must be >= 1".into()));
    }
    fs::create_dir_all(&common.out)?;
    Ok(Some(common.out.clone()))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {jobs} worker threads: {e}")))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn params_of(theta: f64, alpha: f64, regime: Regime) -> Result<Params> {
    Params::new(theta, alpha, regime)
}

// ---------------------------------------------------------------- chain --

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainRun {
    pub theta: f64,
    pub alpha: f64,
    pub regime: Regime,
    pub k: usize,
    pub n: u64,
    pub steps: u64,
    /// Defaults to `10 N`, capped at `steps`.
    pub burn_in: Option<u64>,
    /// Defaults to `K`.
    pub thin: Option<u64>,
    pub seed: u64,
    pub replicates: u64,
    /// Initial counts; defaults to the lattice point nearest the uniform
    /// state.
    pub init: Option<Vec<u64>>,
    pub m_list: Vec<u32>,
    pub format: Format,
}

impl Default for ChainRun {
    fn default() -> Self {
        Self {
            theta: 1.0,
            alpha: 0.0,
            regime: Regime::General,
            k: 2,
            n: 100,
            steps: 1000,
            burn_in: None,
            thin: None,
            seed: 1,
            replicates: 1,
            init: None,
            m_list: vec![2, 3, 4],
            format: Format::Csv,
        }
    }
}

struct ResolvedChain {
    cfg: ChainConfig,
    init: DiscreteSimplexState,
    replicates: u64,
    m_list: Vec<u32>,
    format: Format,
    echo: Value,
}

impl ChainRun {
    fn resolve(mut self) -> Result<ResolvedChain> {
        let params = params_of(self.theta, self.alpha, self.regime)?;
        let kernel = KernelConfig::new(params, self.k, self.n)?;
        let burn_in = self.burn_in.unwrap_or((10 * self.n).min(self.steps));
        let thin = self.thin.unwrap_or(self.k as u64);
        let cfg = ChainConfig::with_schedule(kernel, self.seed, self.steps, burn_in, thin)?;
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be >= 1".into()));
        }
        if let Some(&m) = self.m_list.iter().find(|&&m| m < 2) {
            return Err(Error::InvalidConfig(format!("m_list entries must be >= 2, got {m}")));
        }
        let init = match &self.init {
            Some(counts) => DiscreteSimplexState::with_population(counts.clone(), self.n)
                .map_err(|e| Error::InvalidConfig(format!("init: {e}")))?,
            None => DiscreteSimplexState::from_frequencies(&SimplexState::uniform(self.k)?, self.n)?,
        };
        self.burn_in = Some(burn_in);
        self.thin = Some(thin);
        self.init = Some(init.counts().to_vec());
        Ok(ResolvedChain {
            cfg,
            init,
            replicates: self.replicates,
            m_list: self.m_list.clone(),
            format: self.format,
            echo: serde_json::to_value(&self)?,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
struct MomentSummary {
    m: u32,
    mean: f64,
    stderr: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct ChainReplicateSummary {
    replicate: u64,
    retained: usize,
    final_counts: Vec<u64>,
    phi_means: Vec<MomentSummary>,
}

fn moment_summaries(m_list: &[u32], values: &[Vec<f64>]) -> Vec<MomentSummary> {
    m_list
        .iter()
        .zip(values)
        .map(|(&m, v)| MomentSummary {
            m,
            mean: v.iter().sum::<f64>() / v.len().max(1) as f64,
            stderr: batch_means(v).ok().map(|(_, se)| se),
        })
        .collect()
}

/// Runs one chain replicate, streaming retained states to `path` in the
/// requested format, and collects `phi_m` values along the way.
fn chain_replicate(
    run: &ResolvedChain,
    replicate: u64,
    path: Option<&Path>,
    command: &str,
) -> Result<(DiscreteSimplexState, Vec<Vec<f64>>)> {
    let k = run.cfg.kernel().k();
    enum Sink {
        Csv(CsvWriter<BufWriter<File>>),
        Jsonl(JsonlWriter<BufWriter<File>>),
        None,
    }
    let mut sink = match path {
        None => Sink::None,
        Some(p) => match run.format {
            Format::Csv => {
                let mut cols = vec!["step".to_string()];
                cols.extend(indexed_columns("z", k));
                Sink::Csv(CsvWriter::new(create(p)?, command, &run.echo, &cols)?)
            }
            Format::Jsonl => Sink::Jsonl(JsonlWriter::new(create(p)?, command, &run.echo)?),
            Format::Json => unreachable!("rejected during validation"),
        },
    };
    #[derive(Serialize)]
    struct Record<'a> {
        step: u64,
        counts: &'a [u64],
    }
    let mut values = vec![Vec::new(); run.m_list.len()];
    let mut failure = None;
    let last = simulate_chain(&run.init, &run.cfg, replicate, |step, state| {
        let z = state.to_simplex();
        for (acc, &m) in values.iter_mut().zip(&run.m_list) {
            acc.push(phi(z.freqs(), f64::from(m)).unwrap_or(f64::NAN));
        }
        if failure.is_some() {
            return;
        }
        let res = match &mut sink {
            Sink::Csv(w) => w.row(&[step], z.freqs()),
            Sink::Jsonl(w) => w.record(&Record {
                step,
                counts: state.counts(),
            }),
            Sink::None => Ok(()),
        };
        if let Err(e) = res {
            failure = Some(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    match sink {
        Sink::Csv(w) => {
            w.finish()?;
        }
        Sink::Jsonl(w) => {
            w.finish()?;
        }
        Sink::None => {}
    }
    Ok((last, values))
}

fn path_extension(format: Format) -> Result<&'static str> {
    match format {
        Format::Csv => Ok("csv"),
        Format::Jsonl => Ok("jsonl"),
        Format::Json => Err(Error::InvalidConfig(
            "paths are written as csv or jsonl; json is only used for summaries".into(),
        )),
    }
}

fn simulate_chain_cmd(run: &ResolvedChain, out: &Path, jobs: usize) -> Result<()> {
    const CMD: &str = "simulate-chain";
    let ext = path_extension(run.format)?;
    let summaries = pool(jobs)?.install(|| {
        (0..run.replicates)
            .into_par_iter()
            .map(|r| {
                let file = out.join(format!("chain_r{r}.{ext}"));
                let (last, values) = chain_replicate(run, r, Some(&file), CMD)?;
                Ok(ChainReplicateSummary {
                    replicate: r,
                    retained: values.first().map_or(0, Vec::len),
                    final_counts: last.counts().to_vec(),
                    phi_means: moment_summaries(&run.m_list, &values),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    write_json(create(&out.join("chain_summary.json"))?, CMD, &run.echo, &summaries)
}

// --------------------------------------------------------- diffusion --

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionRun {
    pub theta: f64,
    pub alpha: f64,
    pub regime: Regime,
    pub k: usize,
    /// Defaults to `min(1e-3, 0.1 / (1 + theta + alpha K))`.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub replicates: u64,
    /// Write every `record_every`-th state.
    pub record_every: u64,
    pub ranked: bool,
    pub init: Option<Vec<f64>>,
    pub format: Format,
}

impl Default for DiffusionRun {
    fn default() -> Self {
        Self {
            theta: 1.0,
            alpha: 0.3,
            regime: Regime::General,
            k: 3,
            dt: None,
            t_end: 1.0,
            scheme: Scheme::default(),
            seed: 1,
            replicates: 1,
            record_every: 1,
            ranked: false,
            init: None,
            format: Format::Csv,
        }
    }
}

struct ResolvedDiffusion {
    cfg: DiffusionConfig,
    init: SimplexState,
    replicates: u64,
    record_every: u64,
    ranked: bool,
    format: Format,
    echo: Value,
}

impl DiffusionRun {
    fn resolve(mut self) -> Result<ResolvedDiffusion> {
        let params = params_of(self.theta, self.alpha, self.regime)?;
        if self.k < 2 {
            return Err(Error::InvalidConfig(format!("K >= 2 required, got {}", self.k)));
        }
        let dt = self.dt.unwrap_or_else(|| default_dt(&params, self.k));
        let cfg = DiffusionConfig::new(params, self.k, dt, self.t_end, self.seed)?.with_scheme(self.scheme);
        if self.replicates == 0 || self.record_every == 0 {
            return Err(Error::InvalidConfig("replicates and record_every must be >= 1".into()));
        }
        let init = match &self.init {
            Some(z) => SimplexState::new(z.clone()).map_err(|e| Error::InvalidConfig(format!("init: {e}")))?,
            None => SimplexState::uniform(self.k)?,
        };
        if init.k() != self.k {
            return Err(Error::InvalidConfig(format!("init has {} coordinates, K = {}", init.k(), self.k)));
        }
        path_extension(self.format)?;
        self.dt = Some(dt);
        self.init = Some(init.freqs().to_vec());
        Ok(ResolvedDiffusion {
            cfg,
            init,
            replicates: self.replicates,
            record_every: self.record_every,
            ranked: self.ranked,
            format: self.format,
            echo: serde_json::to_value(&self)?,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
struct DiffusionReplicateSummary {
    replicate: u64,
    steps: u64,
    final_state: Vec<f64>,
    /// Trapezoidal time integral of `1 - sum z_(i)` along the written
    /// ranked path (zero up to rounding).
    mass_deficit: Option<f64>,
}

fn simulate_diffusion_cmd(run: &ResolvedDiffusion, out: &Path, jobs: usize) -> Result<()> {
    const CMD: &str = "simulate-diffusion";
    let ext = path_extension(run.format)?;
    let k = run.cfg.k();
    let dt = run.cfg.dt();
    let summaries = pool(jobs)?.install(|| {
        (0..run.replicates)
            .into_par_iter()
            .map(|r| {
                let mut cols = vec!["t".to_string()];
                cols.extend(indexed_columns("z", k));
                let mut ranked_cols = vec!["t".to_string()];
                ranked_cols.extend(indexed_columns("z_rank", k));
                let plain = out.join(format!("diffusion_r{r}.{ext}"));
                let ranked = out.join(format!("diffusion_ranked_r{r}.{ext}"));
                let mut writers = PathWriters::new(run.format, &plain, &cols, &run.echo, CMD)?;
                let mut ranked_writers = if run.ranked {
                    Some(PathWriters::new(run.format, &ranked, &ranked_cols, &run.echo, CMD)?)
                } else {
                    None
                };
                let mut ranked_states = Vec::new();
                let mut failure = None;
                let last = simulate_diffusion(&run.init, &run.cfg, r, |step, x| {
                    if step % run.record_every != 0 || failure.is_some() {
                        return;
                    }
                    let t = step as f64 * dt;
                    let mut res = writers.write(t, x);
                    if let Some(w) = ranked_writers.as_mut() {
                        let sorted = sort_descending(x);
                        res = res.and_then(|_| w.write(t, &sorted));
                        ranked_states.push(sorted);
                    }
                    if let Err(e) = res {
                        failure = Some(e);
                    }
                })?;
                if let Some(e) = failure {
                    return Err(e);
                }
                writers.finish()?;
                let mass_deficit = match ranked_writers {
                    Some(w) => {
                        w.finish()?;
                        let states: Vec<RankedState> = ranked_states
                            .into_iter()
                            .map(RankedState::new)
                            .collect::<Result<_>>()?;
                        Some(mass_deficit_statistic(&states, dt * run.record_every as f64)?)
                    }
                    None => None,
                };
                Ok(DiffusionReplicateSummary {
                    replicate: r,
                    steps: run.cfg.steps(),
                    final_state: last.into_freqs(),
                    mass_deficit,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    write_json(create(&out.join("diffusion_summary.json"))?, CMD, &run.echo, &summaries)
}

enum PathWriters {
    Csv(CsvWriter<BufWriter<File>>),
    Jsonl(JsonlWriter<BufWriter<File>>),
}

impl PathWriters {
    fn new(format: Format, path: &Path, cols: &[String], echo: &Value, cmd: &str) -> Result<Self> {
        match format {
            Format::Csv => Ok(Self::Csv(CsvWriter::new(create(path)?, cmd, echo, cols)?)),
            _ => Ok(Self::Jsonl(JsonlWriter::new(create(path)?, cmd, echo)?)),
        }
    }

    fn write(&mut self, t: f64, z: &[f64]) -> Result<()> {
        #[derive(Serialize)]
        struct Record<'a> {
            t: f64,
            z: &'a [f64],
        }
        match self {
            Self::Csv(w) => w.row(&[t], z),
            Self::Jsonl(w) => w.record(&Record { t, z }),
        }
    }

    fn finish(self) -> Result<()> {
        match self {
            Self::Csv(w) => w.finish().map(drop),
            Self::Jsonl(w) => w.finish().map(drop),
        }
    }
}

// ------------------------------------------------------- generator gap --

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapRun {
    pub theta: f64,
    pub alpha: f64,
    pub regime: Regime,
    pub m: f64,
    pub k_values: Vec<usize>,
    /// Random ranked states per K, in addition to the uniform state and
    /// the vertex.
    pub samples: usize,
    pub seed: u64,
    pub format: Format,
}

impl Default for GapRun {
    fn default() -> Self {
        Self {
            theta: 1.0,
            alpha: 0.3,
            regime: Regime::General,
            m: 2.5,
            k_values: vec![8, 16, 32, 64, 128, 256],
            samples: 20_000,
            seed: 1,
            format: Format::Csv,
        }
    }
}

struct ResolvedGap {
    params: Params,
    run: GapRun,
    echo: Value,
}

impl GapRun {
    fn resolve(self) -> Result<ResolvedGap> {
        let params = params_of(self.theta, self.alpha, self.regime)?;
        if !(self.m.is_finite() && self.m >= 2.0) {
            return Err(Error::InvalidConfig(format!("m must be >= 2, got {}", self.m)));
        }
        let mut distinct = self.k_values.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 4 {
            return Err(Error::InvalidConfig(format!(
                "a decay fit needs at least 4 distinct K values, got {}",
                distinct.len()
            )));
        }
        if distinct[0] < 2 {
            return Err(Error::InvalidConfig("every K must be >= 2".into()));
        }
        if self.format == Format::Jsonl {
            return Err(Error::InvalidConfig("generator-gap writes csv or json".into()));
        }
        let echo = serde_json::to_value(&self)?;
        Ok(ResolvedGap {
            params,
            run: self,
            echo,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
struct GapSummary<'a> {
    #[serde(flatten)]
    report: &'a GapReport,
    within_bounds: bool,
    non_vanishing: bool,
}

fn generator_gap_cmd(g: &ResolvedGap, out: &Path, jobs: usize) -> Result<()> {
    const CMD: &str = "generator-gap";
    let run = &g.run;
    // One sampler stream per K keeps the result independent of --jobs.
    let gaps = pool(jobs)?.install(|| {
        run.k_values
            .par_iter()
            .map(|&k| {
                let mut sampler = MixtureSampler::with_stream(g.params, run.seed, k as u64);
                sup_gap(run.m, k, &g.params, &mut sampler, run.samples)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let bounds: Vec<f64> = run.k_values.iter().map(|&k| gap_bound(run.m, k, &g.params)).collect();
    let xs: Vec<f64> = run.k_values.iter().map(|&k| k as f64).collect();
    let fit = crate::analysis::loglog_fit(&xs, &gaps)?;
    let report = GapReport {
        m: run.m,
        k_values: run.k_values.clone(),
        sup_gaps: gaps,
        bounds,
        fit_slope: fit.slope,
        fit_intercept: fit.intercept,
        fit_r2: fit.r2,
        sample_size: run.samples,
    };
    if run.format == Format::Csv {
        let cols: Vec<String> = ["K", "m", "gap", "bound"].iter().map(|s| s.to_string()).collect();
        let mut w = CsvWriter::new(create(&out.join("gap.csv"))?, CMD, &g.echo, &cols)?;
        for ((&k, &gap), &bound) in report.k_values.iter().zip(&report.sup_gaps).zip(&report.bounds) {
            w.row(&[k], &[run.m, gap, bound])?;
        }
        w.finish()?;
    }
    let summary = GapSummary {
        report: &report,
        within_bounds: report.within_bounds(),
        non_vanishing: report.non_vanishing(),
    };
    write_json(create(&out.join("gap_summary.json"))?, CMD, &g.echo, &summary)
}

// -------------------------------------------------- stationary compare --

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareRun {
    pub chain: ChainRun,
    /// Pass if `|estimate - analytic| <= n_se * stderr + allowance`.
    pub n_se: f64,
    pub allowance: f64,
}

impl Default for CompareRun {
    fn default() -> Self {
        Self {
            chain: ChainRun {
                theta: 1.0,
                alpha: 0.3,
                k: 20,
                n: 2000,
                steps: 1_000_000,
                ..ChainRun::default()
            },
            n_se: 4.0,
            allowance: 0.02,
        }
    }
}

struct ResolvedCompare {
    chain: ResolvedChain,
    n_se: f64,
    allowance: f64,
    echo: Value,
}

impl CompareRun {
    fn resolve(self) -> Result<ResolvedCompare> {
        if !(self.n_se >= 0.0 && self.allowance >= 0.0) {
            return Err(Error::InvalidConfig("n_se and allowance must be >= 0".into()));
        }
        if self.chain.format == Format::Jsonl {
            return Err(Error::InvalidConfig("stationary-compare writes csv or json".into()));
        }
        let chain = self.chain.clone().resolve()?;
        let echo = serde_json::json!({
            "chain": chain.echo,
            "n_se": self.n_se,
            "allowance": self.allowance,
        });
        Ok(ResolvedCompare {
            chain,
            n_se: self.n_se,
            allowance: self.allowance,
            echo,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
struct CompareRow {
    replicate: u64,
    #[serde(flatten)]
    report: MomentReport,
    pass: bool,
}

fn stationary_compare_cmd(c: &ResolvedCompare, out: &Path, jobs: usize) -> Result<()> {
    const CMD: &str = "stationary-compare";
    let run = &c.chain;
    let params = *run.cfg.kernel().params();
    let rows = pool(jobs)?.install(|| {
        (0..run.replicates)
            .into_par_iter()
            .map(|r| {
                let (_, values) = chain_replicate(run, r, None, CMD)?;
                run.m_list
                    .iter()
                    .zip(&values)
                    .map(|(&m, v)| {
                        let (estimate, stderr) = batch_means(v)?;
                        let report = MomentReport::new(m, estimate, stderr, stationary_moment(m, &params)?);
                        let pass = report.within(c.n_se, c.allowance);
                        Ok(CompareRow {
                            replicate: r,
                            report,
                            pass,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows: Vec<CompareRow> = rows.into_iter().flatten().collect();
    if run.format == Format::Csv {
        let cols: Vec<String> = ["replicate", "m", "estimate", "stderr", "analytic", "z_score", "pass"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut w = CsvWriter::new(create(&out.join("compare.csv"))?, CMD, &c.echo, &cols)?;
        for row in &rows {
            let lead = [
                row.replicate.to_string(),
                row.report.m.to_string(),
                row.report.estimate.to_string(),
                row.report.stderr.to_string(),
                row.report.analytic.to_string(),
                row.report.z_score.to_string(),
                row.pass.to_string(),
            ];
            w.row(&lead, &[])?;
        }
        w.finish()?;
    }
    for row in &rows {
        println!(
            "{} replicate {} m={} estimate={:.6} analytic={:.6} stderr={:.2e}",
            if row.pass { "PASS" } else { "FAIL" },
            row.replicate,
            row.report.m,
            row.report.estimate,
            row.report.analytic,
            row.report.stderr
        );
    }
    write_json(create(&out.join("compare.json"))?, CMD, &c.echo, &rows)
}

// ------------------------------------------------------------ pd sample --

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdRun {
    pub theta: f64,
    pub alpha: f64,
    pub regime: Regime,
    pub j: usize,
    pub draws: usize,
    /// Stop at residual `1e-6` or 4096 sticks and report the rest as tail
    /// mass, instead of the strict `1e-12` / `10^6` rule.
    pub capped: bool,
    pub seed: u64,
    pub format: Format,
}

impl Default for PdRun {
    fn default() -> Self {
        Self {
            theta: 1.0,
            alpha: 0.3,
            regime: Regime::General,
            j: 10,
            draws: 1000,
            capped: false,
            seed: 1,
            format: Format::Csv,
        }
    }
}

struct ResolvedPd {
    params: Params,
    run: PdRun,
    echo: Value,
}

impl PdRun {
    fn resolve(self) -> Result<ResolvedPd> {
        let params = params_of(self.theta, self.alpha, self.regime)?;
        if self.j == 0 || self.draws == 0 {
            return Err(Error::InvalidConfig("j and draws must be >= 1".into()));
        }
        if self.format == Format::Json {
            return Err(Error::InvalidConfig("pd-sample writes csv or jsonl".into()));
        }
        let echo = serde_json::to_value(&self)?;
        Ok(ResolvedPd {
            params,
            run: self,
            echo,
        })
    }
}

fn pd_sample_cmd(p: &ResolvedPd, out: &Path, jobs: usize) -> Result<()> {
    const CMD: &str = "pd-sample";
    let run = &p.run;
    let trunc = if run.capped {
        StickBreakingConfig::for_moments()
    } else {
        StickBreakingConfig::default()
    };
    // Draw d uses stream (seed, d), so the output does not depend on --jobs.
    let samples = pool(jobs)?.install(|| {
        (0..run.draws)
            .into_par_iter()
            .map(|d| sample_pd_with(&p.params, run.j, &trunc, &mut rng::stream(run.seed, d as u64)))
            .collect::<Result<Vec<_>>>()
    })?;
    match run.format {
        Format::Csv => {
            let mut cols = vec!["draw".to_string()];
            cols.extend(indexed_columns("z", run.j));
            cols.push("tail_mass".into());
            let mut w = CsvWriter::new(create(&out.join("pd.csv"))?, CMD, &p.echo, &cols)?;
            for (d, s) in samples.iter().enumerate() {
                let mut row = s.ranked_freqs.clone();
                row.push(s.tail_mass);
                w.row(&[d], &row)?;
            }
            w.finish()?;
        }
        _ => {
            #[derive(Serialize)]
            struct Record<'a> {
                draw: usize,
                ranked_freqs: &'a [f64],
                tail_mass: f64,
            }
            let mut w = JsonlWriter::new(create(&out.join("pd.jsonl"))?, CMD, &p.echo)?;
            for (d, s) in samples.iter().enumerate() {
                w.record(&Record {
                    draw: d,
                    ranked_freqs: &s.ranked_freqs,
                    tail_mass: s.tail_mass,
                })?;
            }
            w.finish()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_in(dir: &Path, args: &[&str]) -> i32 {
        let mut full = vec!["wfpd".to_string()];
        full.extend(args.iter().map(|s| s.to_string()));
        full.push("--out".into());
        full.push(dir.display().to_string());
        run(full)
    }

    #[test]
    fn population_below_minimum_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let code = run_in(dir.path(), &["simulate-chain", "--k", "100", "--alpha", "0.3", "--n", "15"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn gap_needs_four_k_values() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_in(dir.path(), &["generator-gap", "--k-values", "16"]), 2);
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        fs::write(&cfg, r#"{"theta": 2.0, "j": 3, "draws": 5}"#).unwrap();
        let code = run_in(
            dir.path(),
            &["pd-sample", "--config", cfg.to_str().unwrap(), "--j", "4"],
        );
        assert_eq!(code, 0);
        let text = fs::read_to_string(dir.path().join("pd.csv")).unwrap();
        let header = text.lines().nth(1).unwrap();
        assert!(header.contains("\"theta\":2.0") && header.contains("\"j\":4"), "{header}");
        assert_eq!(text.lines().count(), 3 + 5);
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        fs::write(&cfg, r#"{"thetta": 2.0}"#).unwrap();
        assert_eq!(run_in(dir.path(), &["pd-sample", "--config", cfg.to_str().unwrap()]), 2);
    }
}
