//! Command-line front end: solve, simulate, validate, export-mesh and collect.

pub mod mesh;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use posmdp::format::fmt_f64;
use posmdp::model::{build_bus_problem, build_maintenance_problem, ModelDocument};
use posmdp::parallel::set_thread_count;
use posmdp::simulator::{episode_rng, evaluate, rollout};
use posmdp::solver::{solve_with_progress, starting_value_function, SolverConfig};
use posmdp::{collect, load_model, Belief, Execution, Policy, PosmdpModel, SampleBank};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_BELIEFS: usize = 5000;
pub const DEFAULT_OBSERVATION_BINS: usize = 100;
pub const DEFAULT_EPISODES: usize = 1000;
pub const DEFAULT_EPOCHS: usize = 200;
pub const DEFAULT_MESH_RESOLUTION: usize = 20;

/// Exit status for a solve that hit `--max-iters` before converging.
pub const EXIT_NOT_CONVERGED: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "posmdp", version, about = "Point-based planning for partially observable semi-Markov decision processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Collect a sample bank and solve the model, writing a policy file.
    Solve(SolveArgs),
    /// Roll a policy out and report its mean discounted return.
    Simulate(SimulateArgs),
    /// Check a model file and list every violated invariant.
    Validate(ModelArgs),
    /// Evaluate a policy on a regular belief mesh for each observable value.
    ExportMesh(MeshArgs),
    /// Collect a belief and sojourn-time sample bank.
    Collect(CollectArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model JSON file, or one of the built-in names `bus` and `maintenance`.
    pub model: String,
    /// Observation bins for the built-in `maintenance` model.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub observation_bins: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads for data-parallel loops.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of sampled beliefs |B|.
    #[arg(long, default_value_t = DEFAULT_BELIEFS, value_parser = positive)]
    pub beliefs: usize,
    /// Reuse a bank written by `collect` instead of sampling a new one.
    #[arg(long, conflicts_with = "beliefs")]
    pub bank: Option<PathBuf>,
    /// Convergence threshold; defaults to 1e-4 times the largest |R(s,a)|.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = posmdp::solver::DEFAULT_MAX_ITERS, value_parser = positive)]
    pub max_iters: usize,
    /// Policy output path.
    #[arg(short, long, default_value = "policy.json")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Policy file written by `solve`.
    pub policy: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = DEFAULT_EPISODES, value_parser = positive)]
    pub episodes: usize,
    /// Decision epochs per episode.
    #[arg(long, default_value_t = DEFAULT_EPOCHS, value_parser = positive)]
    pub epochs: usize,
    /// Write the first episode as a trajectory CSV.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    pub policy: PathBuf,
    /// Lattice points per simplex edge.
    #[arg(long, default_value_t = DEFAULT_MESH_RESOLUTION, value_parser = positive)]
    pub mesh_resolution: usize,
    /// Mesh CSV output path; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = DEFAULT_BELIEFS, value_parser = positive)]
    pub beliefs: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(short, long, default_value = "bank.json")]
    pub output: PathBuf,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

/// Parses a model document and builds it without the semantic checks.
fn build_unvalidated(args: &ModelArgs) -> Result<PosmdpModel> {
    let bins = args.observation_bins.map(|b| b as usize);
    match args.model.as_str() {
        "bus" if bins.is_none() => Ok(build_bus_problem()),
        "maintenance" => Ok(build_maintenance_problem(bins.unwrap_or(DEFAULT_OBSERVATION_BINS))?),
        _ if bins.is_some() => bail!("--observation-bins only applies to the built-in `maintenance` model"),
        path => {
            let bytes = read(Path::new(path))?;
            let doc: ModelDocument =
                serde_json::from_slice(&bytes).with_context(|| format!("{path} is not a valid model document"))?;
            PosmdpModel::from_document(doc).with_context(|| format!("{path} is not a valid model"))
        }
    }
}

fn load(args: &ModelArgs) -> Result<PosmdpModel> {
    match args.model.as_str() {
        "bus" | "maintenance" => build_unvalidated(args),
        path => {
            if args.observation_bins.is_some() {
                bail!("--observation-bins only applies to the built-in `maintenance` model");
            }
            load_model(&read(Path::new(path))?).with_context(|| format!("{path} is not a valid model"))
        }
    }
}

fn load_policy(path: &Path, model: &PosmdpModel) -> Result<posmdp::ValueFunction> {
    let policy = Policy::from_json(&read(path)?).with_context(|| format!("{} is not a valid policy", path.display()))?;
    policy
        .value_function_for(model)
        .with_context(|| format!("{} cannot be used with this model", path.display()))
}

fn execution(common: &CommonArgs) -> Result<Execution> {
    if common.threads == 1 {
        return Ok(Execution::Sequential);
    }
    // The global pool can only be configured once per process.
    if let Err(e) = set_thread_count(common.threads as usize) {
        eprintln!("warning: thread pool already configured: {e}");
    }
    Ok(Execution::Parallel)
}

pub fn cmd_solve(args: &SolveArgs) -> Result<ExitCode> {
    let model = load(&args.model)?;
    let exec = execution(&args.common)?;
    let bank = match &args.bank {
        Some(path) => SampleBank::from_json(&read(path)?, &model)
            .with_context(|| format!("{} cannot be used with this model", path.display()))?,
        None => collect(&model, args.beliefs, args.common.seed),
    };
    let mut config = SolverConfig {
        max_iters: args.max_iters,
        execution: exec,
        ..SolverConfig::for_model(&model)
    };
    if let Some(eps) = args.epsilon {
        if !(eps.is_finite() && eps > 0.0) {
            bail!("--epsilon must be finite and positive, got {eps}");
        }
        config.epsilon = eps;
    }
    let v0 = starting_value_function(&model, &bank)?;
    eprintln!(
        "solving: |S| = {}, |B| = {}, |C| = {}, epsilon = {}",
        model.num_states(),
        bank.beliefs().len(),
        bank.times().len(),
        config.epsilon
    );
    let mut rng = ChaCha8Rng::seed_from_u64(args.common.seed);
    let outcome = solve_with_progress(&model, &bank, v0, &config, &mut rng, |r| {
        eprintln!(
            "iter {:>4}  |V| = {:>5}  residual = {:.6e}  backups = {:>6}  wall = {:.3}s",
            r.iteration, r.vectors, r.residual, r.backups, r.elapsed_seconds
        );
    })?;
    let policy = Policy::from_outcome(&model, &outcome);
    write(&args.output, policy.to_json()?.as_bytes())?;
    let total: f64 = outcome.trace.iter().map(|r| r.elapsed_seconds).sum();
    println!(
        "{} after {} iterations: {} vectors, {:.3}s; policy written to {}",
        if outcome.converged { "converged" } else { "NOT converged" },
        outcome.trace.len(),
        outcome.value_function.len(),
        total,
        args.output.display()
    );
    Ok(if outcome.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let model = load(&args.model)?;
    let v = load_policy(&args.policy, &model)?;
    let exec = execution(&args.common)?;
    let eval = evaluate(&model, &v, args.episodes, args.epochs, args.common.seed, exec)?;
    if let Some(path) = &args.trajectory {
        let h = rollout(&model, &v, &Belief::initial(&model), args.epochs, &mut episode_rng(args.common.seed, 0))?;
        let mut buf = Vec::new();
        h.write_csv(&model, &mut buf)?;
        write(path, &buf)?;
    }
    match eval.standard_error {
        Some(se) => println!("mean return {} ± {} (SE, {} episodes)", fmt_f64(eval.mean), fmt_f64(se), eval.episodes),
        None => println!("mean return {} (1 episode, SE undefined)", fmt_f64(eval.mean)),
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_validate(args: &ModelArgs) -> Result<ExitCode> {
    let model = build_unvalidated(args)?;
    let report = model.validate();
    if report.is_ok() {
        println!("{report}");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{} violations", report.violations.len());
        print!("{report}");
        Ok(ExitCode::FAILURE)
    }
}

pub fn cmd_export_mesh(args: &MeshArgs) -> Result<ExitCode> {
    let model = load(&args.model)?;
    let Some(factors) = model.mixed_observable() else {
        bail!("mesh export needs a `mixed_observable` block in the model");
    };
    let v = load_policy(&args.policy, &model)?;
    let points = mesh::mesh_points(&model, factors, &v, args.mesh_resolution);
    let mut buf = Vec::new();
    mesh::write_mesh(&model, factors, &points, &mut buf)?;
    match &args.output {
        Some(path) => write(path, &buf)?,
        None => io::stdout().lock().write_all(&buf)?,
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_collect(args: &CollectArgs) -> Result<ExitCode> {
    let model = load(&args.model)?;
    let bank = collect(&model, args.beliefs, args.seed);
    write(&args.output, bank.to_json()?.as_bytes())?;
    let weight_sum: f64 = bank.weighted_transitions().map(|(_, w)| w).sum();
    println!(
        "|B| = {}, |C| = {}, weight sum = {}; bank written to {}",
        bank.beliefs().len(),
        bank.times().len(),
        fmt_f64(weight_sum),
        args.output.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Validate(a) => cmd_validate(a),
        Command::ExportMesh(a) => cmd_export_mesh(a),
        Command::Collect(a) => cmd_collect(a),
    }
}
