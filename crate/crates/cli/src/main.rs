//! `perc`: simulate percolation clusters, infer the bond probability, run the
//! exact oracles and evaluate inner-outer plot designs.
//!
//! Exit codes: 0 success, 2 input error, 3 truncated simulation, 4 capacity
//! guard exceeded.

mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use perc_core::design::{
    design_space, instructive_utility, mc_expected_utility, progressive_chain, ProgressiveConfig,
};
use perc_core::inference::{
    exact_posterior_s1, exact_posterior_s2, run_s1, run_s2, InitialGraph, Summary,
};
use perc_core::percolation::{parse_cluster, write_cluster, write_metadata};
use perc_core::rng::derive_seed;
use perc_core::{intensity_to_p, simulate_cluster, ChainConfig, Design, Error, Plot, PriorSpec, Simulation};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "perc", version, about = "Bond percolation clusters: simulation, inference of p, plot design")]
struct Cli {
    /// File of `key=value` lines supplying defaults for long flags
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the open cluster of the origin
    Simulate(SimulateArgs),
    /// Posterior of p from the observed cluster sites
    InferS1(InferS1Args),
    /// Posterior of p from the observed cluster size
    InferS2(InferS2Args),
    /// Exact mixture table of a small instance
    Oracle(OracleArgs),
    /// Expected-utility evaluation of inner-outer designs
    Design(DesignArgs),
}

#[derive(Args)]
struct BatchArgs {
    /// Independent replicates; replicate i uses a seed derived from (seed, i)
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    /// Worker threads (default: all cores); results do not depend on it
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// `full:d`, `box:d,N` or `inner-outer:d,m,r`
    #[arg(long, default_value = "full:2")]
    plot: String,
    /// Bond probability
    #[arg(long, conflicts_with = "lambda")]
    p: Option<f64>,
    /// Infection rate; p = 1 - exp(-lambda * tau)
    #[arg(long)]
    lambda: Option<f64>,
    /// Infectious period used with --lambda
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Abandon clusters larger than this (default 10^6 on unbounded plots)
    #[arg(long)]
    cap: Option<usize>,
    /// Also write the open edges
    #[arg(long)]
    edges: bool,
    /// Cluster file; a `.meta` sidecar is written next to it (stdout if absent)
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    batch: BatchArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitialArg {
    Standard,
    Compact,
}

#[derive(Args)]
struct ChainArgs {
    /// Gibbs + Metropolis-Hastings pairs
    #[arg(long, default_value_t = 200_000)]
    iterations: u64,
    #[arg(long, default_value_t = 20_000)]
    burn_in: u64,
    #[arg(long, default_value_t = 10)]
    thin: u64,
    #[arg(long, value_enum, default_value_t = InitialArg::Standard)]
    initial: InitialArg,
    /// `uniform` or `beta:a,b`
    #[arg(long, default_value = "uniform")]
    prior: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct InferS1Args {
    /// Cluster file
    #[arg(long)]
    cluster: PathBuf,
    #[arg(long, default_value = "full:2")]
    plot: String,
    #[command(flatten)]
    chain: ChainArgs,
    /// Output prefix: writes PREFIX.csv and PREFIX.summary.json
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    batch: BatchArgs,
}

#[derive(Args)]
struct InferS2Args {
    /// Observed cluster size
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "full:2")]
    plot: String,
    #[command(flatten)]
    chain: ChainArgs,
    /// Output prefix: writes PREFIX.csv and PREFIX.summary.json
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    batch: BatchArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    S1,
    S2,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    /// Cluster file (s1)
    #[arg(long)]
    cluster: Option<PathBuf>,
    /// Cluster size (s2)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value = "full:2")]
    plot: String,
    /// CSV `s,k,l,count` (stdout if absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum DesignMode {
    Instructive,
    Progressive,
    Mc,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long, value_enum)]
    mode: DesignMode,
    /// Plot side N = m + 4r
    #[arg(long)]
    side: u32,
    /// Known bond probability generating the data (instructive mode)
    #[arg(long)]
    p_star: Option<f64>,
    /// Experimenter prior (`uniform` or `beta:a,b`)
    #[arg(long, default_value = "uniform")]
    prior: String,
    /// Monte Carlo replicates per design (instructive and mc modes)
    #[arg(long, default_value_t = 300)]
    samples: usize,
    /// Inner S1 chain length per utility evaluation
    #[arg(long, default_value_t = 100_000)]
    inner_iterations: u64,
    #[arg(long, default_value_t = 10_000)]
    inner_burn_in: u64,
    #[arg(long, default_value_t = 10)]
    inner_thin: u64,
    /// Progressive chain length
    #[arg(long, default_value_t = 40_000)]
    outer_iterations: u64,
    #[arg(long, default_value_t = 2_000)]
    outer_burn_in: u64,
    #[arg(long, default_value_t = 1e-3)]
    utility_floor: f64,
    #[arg(long, default_value_t = 20.0)]
    utility_cap: f64,
    #[arg(long, default_value_t = 0.05)]
    p_step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report CSV
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

/// Command failure, mapped onto the exit code.
enum Failure {
    Input(String),
    Truncated(String),
    Capacity(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::Capacity(_) => Failure::Capacity(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

fn main() -> ExitCode {
    let argv = match config::merge(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let command_line = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let cli = Cli::parse_from(argv);
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, &command_line),
        Command::InferS1(a) => infer_s1(a, &command_line),
        Command::InferS2(a) => infer_s2(a, &command_line),
        Command::Oracle(a) => oracle(a, &command_line),
        Command::Design(a) => design(a, &command_line),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Truncated(m)) => {
            eprintln!("truncated: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Capacity(m)) => {
            eprintln!("capacity: {m}");
            ExitCode::from(4)
        }
    }
}

fn header(command_line: &str, seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("perc {VERSION}; command: {command_line}; seed: {s}"),
        None => format!("perc {VERSION}; command: {command_line}"),
    }
}

fn write_file(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| input(format!("cannot write {}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// `out` itself for a single run, `out.rI` for replicate `I` of a batch.
fn replicate_path(out: &Path, i: usize, batch: &BatchArgs) -> PathBuf {
    if batch.replicates == 1 {
        out.to_path_buf()
    } else {
        with_suffix(out, &format!(".r{i}"))
    }
}

fn replicate_seed(seed: u64, i: usize, batch: &BatchArgs) -> u64 {
    if batch.replicates == 1 {
        seed
    } else {
        derive_seed(seed, i as u64)
    }
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(input("--threads must be positive"));
        }
        b = b.num_threads(t);
    }
    b.build().map_err(|e| input(e.to_string()))
}

fn parse_plot(spec: &str) -> Result<Arc<Plot>, Failure> {
    Ok(Arc::new(spec.parse::<Plot>()?))
}

fn parse_prior(spec: &str) -> Result<PriorSpec, Failure> {
    if spec == "uniform" {
        return Ok(PriorSpec::Uniform);
    }
    let bad = || input(format!("bad prior {spec:?}; expected `uniform` or `beta:a,b`"));
    let args = spec.strip_prefix("beta:").ok_or_else(bad)?;
    let (a, b) = args.split_once(',').ok_or_else(bad)?;
    let prior = PriorSpec::Beta {
        a: a.trim().parse().map_err(|_| bad())?,
        b: b.trim().parse().map_err(|_| bad())?,
    };
    prior.beta_shape()?;
    Ok(prior)
}

fn chain_config(c: &ChainArgs, seed: u64) -> ChainConfig {
    ChainConfig {
        iterations: c.iterations,
        burn_in: c.burn_in,
        thin: c.thin,
        seed,
        initial: match c.initial {
            InitialArg::Standard => InitialGraph::Standard,
            InitialArg::Compact => InitialGraph::Compact,
        },
    }
}

fn simulate(a: SimulateArgs, command_line: &str) -> Outcome {
    let plot = parse_plot(&a.plot)?;
    let p = match (a.p, a.lambda) {
        (Some(p), None) => p,
        (None, Some(l)) => intensity_to_p(l, a.tau)?,
        _ => return Err(input("give exactly one of --p and --lambda")),
    };
    if a.batch.replicates == 0 {
        return Err(input("--replicates must be positive"));
    }
    if a.out.is_none() && a.batch.replicates > 1 {
        return Err(input("--out is required with --replicates"));
    }
    let runs = pool(a.batch.threads)?.install(|| {
        (0..a.batch.replicates)
            .into_par_iter()
            .map(|i| {
                let seed = replicate_seed(a.seed, i, &a.batch);
                simulate_cluster(&plot, p, seed, a.cap).map(|s| (seed, s))
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;

    let mut truncated = Vec::new();
    let mut aggregate = String::from("replicate,seed,sites,open_edges,truncated\n");
    for (i, (seed, sim)) in runs.into_iter().enumerate() {
        let head = header(command_line, Some(seed));
        match sim {
            Simulation::Truncated { cap } => {
                truncated.push(format!("seed {seed}: cluster exceeded {cap} sites"));
                let _ = writeln!(aggregate, "{i},{seed},,,true");
            }
            Simulation::Cluster(g) => {
                let text = write_cluster(&g, a.edges, Some(&head));
                let _ = writeln!(aggregate, "{i},{seed},{},{},false", g.len(), g.stats().e_open);
                match &a.out {
                    None => print!("{text}"),
                    Some(out) => {
                        let path = replicate_path(out, i, &a.batch);
                        write_file(&path, &text)?;
                        let meta = BTreeMap::from([
                            ("version".to_string(), VERSION.to_string()),
                            ("command".to_string(), command_line.to_string()),
                            ("seed".to_string(), seed.to_string()),
                            ("plot".to_string(), plot.to_string()),
                            ("p".to_string(), format!("{p}")),
                            ("sites".to_string(), g.len().to_string()),
                            ("open_edges".to_string(), g.stats().e_open.to_string()),
                        ]);
                        write_file(&with_suffix(&path, ".meta"), &write_metadata(&meta))?;
                    }
                }
            }
        }
    }
    if a.batch.replicates > 1 {
        let out = a.out.as_ref().expect("checked above");
        let text = format!("# {}\n{aggregate}", header(command_line, Some(a.seed)));
        write_file(&with_suffix(out, ".aggregate.csv"), &text)?;
    }
    if truncated.is_empty() {
        Ok(())
    } else {
        Err(Failure::Truncated(truncated.join("; ")))
    }
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    version: &'a str,
    command: &'a str,
    seed: u64,
    #[serde(flatten)]
    summary: Summary,
}

/// Runs `run` once per replicate and writes the sample CSV, the JSON summary
/// and, for batches, an aggregate of the summaries.
fn run_inference<F>(batch: &BatchArgs, chain: &ChainArgs, out: &Path, command_line: &str, run: F) -> Outcome
where
    F: Fn(&ChainConfig) -> Result<perc_core::PosteriorSample, Error> + Sync,
{
    if batch.replicates == 0 {
        return Err(input("--replicates must be positive"));
    }
    let samples = pool(batch.threads)?.install(|| {
        (0..batch.replicates)
            .into_par_iter()
            .map(|i| run(&chain_config(chain, replicate_seed(chain.seed, i, batch))))
            .collect::<Result<Vec<_>, Error>>()
    })?;
    let mut aggregate = String::from("replicate,seed,draws,mean,mode,ci_low,ci_high,acceptance_rate\n");
    for (i, sample) in samples.iter().enumerate() {
        let seed = sample.config.seed;
        let head = header(command_line, Some(seed));
        let prefix = replicate_path(out, i, batch);
        write_file(&with_suffix(&prefix, ".csv"), &sample.to_csv(Some(&head)))?;
        let summary = sample.summary();
        let mode = summary.mode.map(|m| format!("{m:.6}")).unwrap_or_default();
        let _ = writeln!(
            aggregate,
            "{i},{seed},{},{:.6},{mode},{:.6},{:.6},{:.6}",
            summary.draws, summary.mean, summary.ci95.0, summary.ci95.1, summary.acceptance_rate
        );
        if batch.replicates == 1 {
            println!(
                "mean {:.4}  mode {mode}  95% interval [{:.4}, {:.4}]  acceptance {:.3}",
                summary.mean, summary.ci95.0, summary.ci95.1, summary.acceptance_rate
            );
        }
        let file = SummaryFile {
            version: VERSION,
            command: command_line,
            seed,
            summary,
        };
        let json = serde_json::to_string_pretty(&file).map_err(|e| input(e.to_string()))?;
        write_file(&with_suffix(&prefix, ".summary.json"), &(json + "\n"))?;
    }
    if batch.replicates > 1 {
        let text = format!("# {}\n{aggregate}", header(command_line, Some(chain.seed)));
        write_file(&with_suffix(out, ".aggregate.csv"), &text)?;
    }
    Ok(())
}

fn infer_s1(a: InferS1Args, command_line: &str) -> Outcome {
    let plot = parse_plot(&a.plot)?;
    let prior = parse_prior(&a.chain.prior)?;
    let file = parse_cluster(&read_file(&a.cluster)?)?;
    chain_config(&a.chain, a.chain.seed).validate()?;
    run_inference(&a.batch, &a.chain, &a.out, command_line, |cfg| {
        run_s1(&file.sites, &plot, cfg, prior)
    })
}

fn infer_s2(a: InferS2Args, command_line: &str) -> Outcome {
    let plot = parse_plot(&a.plot)?;
    let prior = parse_prior(&a.chain.prior)?;
    if a.n == 0 {
        return Err(input("--n must be at least 1"));
    }
    chain_config(&a.chain, a.chain.seed).validate()?;
    run_inference(&a.batch, &a.chain, &a.out, command_line, |cfg| run_s2(a.n, &plot, cfg, prior))
}

fn oracle(a: OracleArgs, command_line: &str) -> Outcome {
    let plot = parse_plot(&a.plot)?;
    let table = match a.scenario {
        ScenarioArg::S1 => {
            let path = a.cluster.ok_or_else(|| input("--cluster is required for s1"))?;
            let file = parse_cluster(&read_file(&path)?)?;
            exact_posterior_s1(&file.sites, &plot)?
        }
        ScenarioArg::S2 => {
            let n = a.n.ok_or_else(|| input("--n is required for s2"))?;
            exact_posterior_s2(n, &plot)?
        }
    };
    let text = table.to_csv(Some(&header(command_line, None)));
    match a.out {
        Some(out) => write_file(&out, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Highest value, ties going to the smaller `r`.
fn select(designs: &[Design], values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..designs.len() {
        if values[i] > values[best] || (values[i] == values[best] && designs[i].r < designs[best].r) {
            best = i;
        }
    }
    best
}

fn design(a: DesignArgs, command_line: &str) -> Outcome {
    let designs = design_space(a.side)?;
    let prior = parse_prior(&a.prior)?;
    let inner = ChainConfig {
        iterations: a.inner_iterations,
        burn_in: a.inner_burn_in,
        thin: a.inner_thin,
        ..ChainConfig::default()
    };
    inner.validate()?;
    let head = header(command_line, Some(a.seed));
    let pool = pool(a.threads)?;
    let (text, chosen) = match a.mode {
        DesignMode::Instructive | DesignMode::Mc => {
            let p_star = match a.mode {
                DesignMode::Instructive => {
                    let p = a.p_star.ok_or_else(|| input("--p-star is required in instructive mode"))?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(input(format!("--p-star {p} outside [0, 1]")));
                    }
                    Some(p)
                }
                _ => None,
            };
            if a.samples == 0 {
                return Err(input("--samples must be positive"));
            }
            let estimates = pool.install(|| {
                designs
                    .iter()
                    .map(|&d| match p_star {
                        Some(p) => instructive_utility(d, p, a.samples, &inner, a.seed),
                        None => mc_expected_utility(d, prior, a.samples, &inner, a.seed),
                    })
                    .collect::<Result<Vec<_>, Error>>()
            })?;
            let mut text = format!("# {head}\ndesign,m,r,utility_mean,utility_se,M\n");
            for (d, e) in designs.iter().zip(&estimates) {
                let se = e.std_error.map(|s| format!("{s:.6}")).unwrap_or_default();
                let _ = writeln!(text, "{},{},{},{:.6},{se},{}", d.label(), d.m, d.r, e.mean, e.m);
            }
            let means: Vec<f64> = estimates.iter().map(|e| e.mean).collect();
            (text, designs[select(&designs, &means)])
        }
        DesignMode::Progressive => {
            let cfg = ProgressiveConfig {
                iterations: a.outer_iterations,
                burn_in: a.outer_burn_in,
                inner,
                prior,
                utility_floor: a.utility_floor,
                utility_cap: a.utility_cap,
                p_step: a.p_step,
                seed: a.seed,
            };
            let res = progressive_chain(&designs, &cfg)?;
            let mut text = format!("# {head}\ndesign,frequency\n");
            for (d, f) in designs.iter().zip(&res.frequencies) {
                let _ = writeln!(text, "{},{f:.6}", d.label());
            }
            (text, res.mode)
        }
    };
    write_file(&a.out, &text)?;
    println!("selected design {chosen} ({})", chosen.label());
    Ok(())
}
