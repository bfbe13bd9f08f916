//! The `polecart` command line.
//!
//! Settings resolve in three layers: built-in defaults, then an optional
//! JSON file given with `--config`, then explicit flags. The file mirrors
//! the library config types, and every key is optional:
//!
//! ```json
//! {
//!   "trainer": { "gamma": 0.99, "episodes": 1500, "epsilon": { "start": 1.0, "end": 0.05, "decay_steps": 10000 } },
//!   "architecture": { "gru_hidden_dim": 32, "n_heads": 4 },
//!   "algorithms": ["dqn", "drqn"],
//!   "seeds": 5,
//!   "jobs": 4
//! }
//! ```
//!
//! `trainer` takes the fields of [`TrainerConfig`] and `architecture` those
//! of [`ArchitectureConfig`]; the window length always comes from the
//! trainer section.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::Deserialize;

use crate::env::CartPole;
use crate::error::{Error, Result};
use crate::harness::{
    read_csv, run_suite, summarize, train_agent, trace_csv_path, write_csv, write_smoothed_csv,
    write_suite_outputs, write_trace_plot, FINAL_WINDOW, MOVING_AVERAGE_WINDOW,
};
use crate::qnets::{ArchitectureConfig, Readout, Variant};
use crate::rl::TrainerConfig;
use crate::verify::{gradient_suite, physics_check};

const DEFAULT_SEEDS: usize = 5;
const FULL_SEEDS: usize = 10;
const FULL_EPISODES: usize = 5000;

#[derive(Debug, Parser)]
#[command(
    name = "polecart",
    version,
    about = "Q-learning with DQN, DRQN and DTQN agents on a partially observable CartPole",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Debug, Subcommand)]
enum Commands {
    /// Train one agent and write its episode trace.
    Train(TrainArgs),
    /// Train several algorithms over several seeds and write traces, plots
    /// and a summary.
    Suite(SuiteArgs),
    /// Draw CSV traces of one algorithm into a single SVG.
    Plot(PlotArgs),
    /// Finite-difference check of every autodiff primitive and network.
    Gradcheck(GradcheckArgs),
    /// Compare the environment against a second integrator and check its
    /// mirror symmetry.
    Physcheck(PhyscheckArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// dqn, drqn or dtqn [default: drqn]
    #[arg(long, value_name = "ALGO")]
    algo: Option<Variant>,
    /// Master seed [default: 0]
    #[arg(long, default_value_t = 0, hide_default_value = true)]
    seed: u64,
    /// Also save the trained parameters to this file [default: none]
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    /// Comma-separated algorithms [default: dqn,drqn,dtqn]
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    algos: Option<Vec<Variant>>,
    /// Number of seeds per algorithm [default: 5]
    #[arg(long, value_name = "N", value_parser = positive)]
    seeds: Option<usize>,
    /// First master seed; seeds run consecutively from here [default: 0]
    #[arg(long, default_value_t = 0, hide_default_value = true)]
    first_seed: u64,
    /// Worker threads [default: available cores]
    #[arg(long, value_name = "N", value_parser = positive)]
    jobs: Option<usize>,
    /// Three algorithms, 10 seeds, 5000 episodes unless overridden [default: off]
    #[arg(long)]
    full_protocol: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON settings file, applied before flags [default: none]
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory [default: runs]
    #[arg(long, env = "POLECART_OUT", value_name = "DIR", hide_env_values = true)]
    out: Option<PathBuf>,
    /// Also write seed_<s>_ma50.csv with a 50-episode moving average [default: off]
    #[arg(long)]
    smooth: bool,

    /// Training episodes per run [default: 1500]
    #[arg(long, value_parser = positive)]
    episodes: Option<usize>,
    /// Observations per window [default: 4]
    #[arg(long, value_parser = positive)]
    window: Option<usize>,
    /// Discount factor in [0, 1) [default: 0.99]
    #[arg(long, value_parser = discount)]
    gamma: Option<f64>,
    /// Environment steps between target-network syncs [default: 100]
    #[arg(short = 'C', long, value_name = "STEPS", value_parser = positive_u64)]
    target_sync: Option<u64>,
    /// Transitions per gradient step [default: 32]
    #[arg(long, value_parser = positive)]
    batch_size: Option<usize>,
    /// Replay memory capacity [default: 10000]
    #[arg(long, value_parser = positive)]
    buffer_capacity: Option<usize>,
    /// Replay size at which training starts [default: 500]
    #[arg(long, value_parser = positive)]
    train_start: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long, value_parser = positive_f64)]
    lr: Option<f64>,
    /// Initial exploration rate [default: 1.0]
    #[arg(long, value_parser = probability)]
    eps_start: Option<f64>,
    /// Final exploration rate [default: 0.05]
    #[arg(long, value_parser = probability)]
    eps_end: Option<f64>,
    /// Steps over which exploration decays linearly [default: 10000]
    #[arg(long)]
    eps_decay: Option<u64>,

    /// DQN hidden layer width [default: 64]
    #[arg(long, value_parser = positive)]
    hidden_dim: Option<usize>,
    /// DRQN input projection width [default: 16]
    #[arg(long, value_parser = positive)]
    gru_input_dim: Option<usize>,
    /// DRQN hidden state width [default: 64]
    #[arg(long, value_parser = positive)]
    gru_hidden_dim: Option<usize>,
    /// DTQN model width [default: 32]
    #[arg(long, value_parser = positive)]
    model_dim: Option<usize>,
    /// DTQN attention heads [default: 2]
    #[arg(long, value_parser = positive)]
    heads: Option<usize>,
    /// DTQN encoder layers [default: 2]
    #[arg(long, value_parser = positive)]
    layers: Option<usize>,
    /// DTQN feed-forward width [default: 64]
    #[arg(long, value_parser = positive)]
    ff_dim: Option<usize>,
    /// DTQN sequence readout, final or mean [default: final]
    #[arg(long)]
    readout: Option<Readout>,
    /// Disable the DTQN positional encoding [default: off]
    #[arg(long)]
    no_positional_encoding: bool,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Trace CSVs, named seed_<s>.csv inside a directory named after the algorithm
    #[arg(long = "in", value_name = "CSV", num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    /// Algorithm label when the directory name is not one [default: from path]
    #[arg(long)]
    algo: Option<Variant>,
    /// SVG file to write [default: traces.svg next to the first input]
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Random draws per case [default: 20]
    #[arg(long, default_value_t = 20, hide_default_value = true, value_parser = positive)]
    draws: usize,
    /// Seed of the input draws [default: 0]
    #[arg(long, default_value_t = 0, hide_default_value = true)]
    seed: u64,
}

#[derive(Debug, Args)]
struct PhyscheckArgs {
    /// Random (state, action) pairs [default: 1000]
    #[arg(long, default_value_t = 1000, hide_default_value = true, value_parser = positive)]
    pairs: usize,
    /// Largest accepted per-field difference [default: 1e-12]
    #[arg(long, default_value_t = 1e-12, hide_default_value = true)]
    tolerance: f64,
    /// Seed of the state draws [default: 0]
    #[arg(long, default_value_t = 0, hide_default_value = true)]
    seed: u64,
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_u64(s: &str) -> std::result::Result<u64, String> {
    positive(s).map(|n| n as u64)
}

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err("must be positive".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn discount(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..1.0).contains(&v) => Ok(v),
        Ok(_) => Err("must be in [0, 1)".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn probability(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
        Ok(_) => Err("must be in [0, 1]".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub trainer: TrainerConfig,
    pub architecture: ArchitectureConfig,
    pub algorithms: Option<Vec<Variant>>,
    pub seeds: Option<usize>,
    pub jobs: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
    }
}

/// A fully resolved command.
#[derive(Debug, Clone, PartialEq)]
pub enum CliConfig {
    Train {
        arch: ArchitectureConfig,
        trainer: TrainerConfig,
        seed: u64,
        out: PathBuf,
        checkpoint: Option<PathBuf>,
        smooth: bool,
    },
    Suite {
        algorithms: Vec<ArchitectureConfig>,
        trainer: TrainerConfig,
        seeds: Vec<u64>,
        jobs: usize,
        out: PathBuf,
        smooth: bool,
    },
    Plot {
        inputs: Vec<(PathBuf, Variant, u64)>,
        output: PathBuf,
    },
    Gradcheck {
        draws: usize,
        seed: u64,
    },
    Physcheck {
        pairs: usize,
        tolerance: f64,
        seed: u64,
    },
}

struct Resolved {
    file: FileConfig,
    arch: ArchitectureConfig,
    trainer: TrainerConfig,
    out: PathBuf,
}

fn resolve(common: &CommonArgs, full_episodes: bool) -> Result<Resolved> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut trainer = file.trainer.clone();
    let mut arch = file.architecture.clone();
    if full_episodes {
        trainer.episodes = FULL_EPISODES;
    }

    let set = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut trainer.episodes, common.episodes);
    set(&mut trainer.window_length, common.window);
    set(&mut trainer.batch_size, common.batch_size);
    set(&mut trainer.buffer_capacity, common.buffer_capacity);
    set(&mut trainer.train_start_size, common.train_start);
    set(&mut arch.hidden_dim, common.hidden_dim);
    set(&mut arch.gru_input_dim, common.gru_input_dim);
    set(&mut arch.gru_hidden_dim, common.gru_hidden_dim);
    set(&mut arch.model_dim, common.model_dim);
    set(&mut arch.n_heads, common.heads);
    set(&mut arch.n_layers, common.layers);
    set(&mut arch.feedforward_dim, common.ff_dim);
    trainer.gamma = common.gamma.unwrap_or(trainer.gamma);
    trainer.target_sync_interval = common.target_sync.unwrap_or(trainer.target_sync_interval);
    trainer.learning_rate = common.lr.unwrap_or(trainer.learning_rate);
    trainer.epsilon.start = common.eps_start.unwrap_or(trainer.epsilon.start);
    trainer.epsilon.end = common.eps_end.unwrap_or(trainer.epsilon.end);
    trainer.epsilon.decay_steps = common.eps_decay.unwrap_or(trainer.epsilon.decay_steps);
    arch.readout = common.readout.unwrap_or(arch.readout);
    if common.no_positional_encoding {
        arch.positional_encoding = false;
    }
    arch.window_length = trainer.window_length;

    trainer.validate()?;
    arch.validate()?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("runs"));
    Ok(Resolved {
        file,
        arch,
        trainer,
        out,
    })
}

/// Algorithm and seed of a trace file laid out as `<algo>/seed_<s>.csv`.
fn plot_input(path: &Path, index: usize, algo: Option<Variant>) -> Result<(PathBuf, Variant, u64)> {
    if !path.is_file() {
        return Err(Error::Invalid(format!("{}: no such file", path.display())));
    }
    let seed = path
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.strip_prefix("seed_"))
        .and_then(|s| s.parse().ok())
        .unwrap_or(index as u64);
    let from_dir = path
        .parent()
        .and_then(|p| p.file_name())
        .and_then(|n| n.to_str())
        .and_then(|n| n.parse().ok());
    let algorithm = algo.or(from_dir).ok_or_else(|| {
        Error::Invalid(format!(
            "cannot tell the algorithm of {}; pass --algo",
            path.display()
        ))
    })?;
    Ok((path.to_path_buf(), algorithm, seed))
}

fn resolve_cli(cli: Cli) -> Result<CliConfig> {
    Ok(match cli.command {
        Commands::Train(a) => {
            let r = resolve(&a.common, false)?;
            let variant = a.algo.or(r.file.algorithms.as_ref().and_then(|v| v.first().copied()));
            CliConfig::Train {
                arch: ArchitectureConfig {
                    variant: variant.unwrap_or(Variant::Drqn),
                    ..r.arch
                },
                trainer: r.trainer,
                seed: a.seed,
                out: r.out,
                checkpoint: a.checkpoint,
                smooth: a.common.smooth,
            }
        }
        Commands::Suite(a) => {
            let r = resolve(&a.common, a.full_protocol && a.common.episodes.is_none())?;
            let default_seeds = if a.full_protocol { FULL_SEEDS } else { DEFAULT_SEEDS };
            let variants = a
                .algos
                .or(r.file.algorithms.clone())
                .unwrap_or_else(|| Variant::ALL.to_vec());
            let mut unique = variants.clone();
            unique.sort();
            unique.dedup();
            if variants.is_empty() || unique.len() != variants.len() {
                return Err(Error::Invalid("--algos must list distinct algorithms".into()));
            }
            let count = a.seeds.or(r.file.seeds).unwrap_or(default_seeds);
            if count == 0 {
                return Err(Error::Invalid("seed count must be positive".into()));
            }
            let jobs = a
                .jobs
                .or(r.file.jobs)
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            CliConfig::Suite {
                algorithms: variants
                    .iter()
                    .map(|&variant| ArchitectureConfig {
                        variant,
                        ..r.arch.clone()
                    })
                    .collect(),
                trainer: r.trainer,
                seeds: (0..count as u64).map(|i| a.first_seed + i).collect(),
                jobs: jobs.max(1),
                out: r.out,
                smooth: a.common.smooth,
            }
        }
        Commands::Plot(a) => {
            let inputs = a
                .inputs
                .iter()
                .enumerate()
                .map(|(i, p)| plot_input(p, i, a.algo))
                .collect::<Result<Vec<_>>>()?;
            let output = a.output.unwrap_or_else(|| {
                let dir = a.inputs[0].parent().unwrap_or(Path::new("."));
                dir.join("traces.svg")
            });
            CliConfig::Plot { inputs, output }
        }
        Commands::Gradcheck(a) => CliConfig::Gradcheck {
            draws: a.draws,
            seed: a.seed,
        },
        Commands::Physcheck(a) => CliConfig::Physcheck {
            pairs: a.pairs,
            tolerance: a.tolerance,
            seed: a.seed,
        },
    })
}

/// Parses `argv` (program name first) and resolves defaults, config file
/// and flags. Nothing is written before this succeeds.
pub fn parse_and_validate<I, T>(argv: I) -> std::result::Result<CliConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    resolve_cli(cli).map_err(|e| Cli::command().error(ErrorKind::ValueValidation, e))
}

/// Runs a resolved command and returns the process exit code.
pub fn dispatch(config: &CliConfig) -> i32 {
    match execute(config) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(config: &CliConfig) -> Result<bool> {
    match config {
        CliConfig::Train {
            arch,
            trainer,
            seed,
            out,
            checkpoint,
            smooth,
        } => {
            let (trace, agent) = train_agent(arch, trainer, *seed, |r| {
                if r.episode % 100 == 0 {
                    eprintln!("{} seed {seed}: episode {} score {}", arch.variant, r.episode, r.score);
                }
            })?;
            let path = trace_csv_path(out, arch.variant, *seed);
            let dir = path.parent().expect("trace path has a parent");
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            write_csv(&trace, &path)?;
            if *smooth {
                write_smoothed_csv(&trace, dir.join(format!("seed_{seed}_ma{MOVING_AVERAGE_WINDOW}.csv")))?;
            }
            if let Some(ckpt) = checkpoint {
                agent.params.save(ckpt)?;
            }
            println!(
                "{} seed {seed}: max {} final-{FINAL_WINDOW} mean {:.2} -> {}",
                arch.variant,
                trace.max_score(),
                trace.final_mean(FINAL_WINDOW),
                path.display()
            );
            Ok(true)
        }
        CliConfig::Suite {
            algorithms,
            trainer,
            seeds,
            jobs,
            out,
            smooth,
        } => {
            let result = run_suite(algorithms, trainer, seeds, *jobs)?;
            fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            write_suite_outputs(&result, algorithms, trainer, out, *smooth)?;
            print!("{}", summarize(&result));
            Ok(true)
        }
        CliConfig::Plot { inputs, output } => {
            let traces = inputs
                .iter()
                .map(|(path, algorithm, seed)| read_csv(path, *algorithm, *seed))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<_> = traces.iter().collect();
            write_trace_plot(&refs, output)?;
            println!("{}", output.display());
            Ok(true)
        }
        CliConfig::Gradcheck { draws, seed } => {
            let cases = gradient_suite(*draws, *seed)?;
            let mut ok = true;
            for c in &cases {
                ok &= c.passed();
                println!(
                    "{} {:<40} max rel err {:.2e} (tol {:.0e}, {} draws, {} entries)",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.name,
                    c.max_relative_error,
                    c.tolerance,
                    c.draws,
                    c.checked
                );
            }
            Ok(ok)
        }
        CliConfig::Physcheck {
            pairs,
            tolerance,
            seed,
        } => {
            let report = physics_check(&CartPole::default(), *pairs, *seed)?;
            let ok = report.passes(*tolerance);
            println!(
                "{} {} pairs: max field difference {:.3e} (tol {:.0e}), {} mirror mismatches",
                if ok { "PASS" } else { "FAIL" },
                report.pairs,
                report.max_abs_error,
                tolerance,
                report.mirror_mismatches
            );
            Ok(ok)
        }
    }
}

/// Entry point of the `polecart` binary.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse_and_validate(argv) {
        Ok(config) => dispatch(&config),
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
