//! Batch front end: synthesize or ingest task data, preprocess it into pose
//! clouds, optimize an arm morphology, simulate workspace transitions, and
//! evaluate or compare designs. Every invocation writes into a fresh
//! timestamped run directory together with its resolved configuration.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<bimorph_core::Error> for CliError {
    fn from(e: bimorph_core::Error) -> Self {
        use bimorph_core::Error as E;
        match e {
            E::Io(_) | E::Parse(_) => CliError::Io(e.to_string()),
            E::UnknownLabel(_) | E::InvalidInput(_) | E::InvalidDesign(_) | E::EmptyWindow { .. } => {
                CliError::Config(e.to_string())
            }
            E::AngleNearPi { .. } | E::DimensionMismatch { .. } | E::NumericallySingular | E::ConstraintUnsatisfiable(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "bimorph", version, about = "Task-driven morphology optimization for bilateral manipulators")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; defaults apply to omitted keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured parent output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the configured worker count.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Restricts or labels the task (pick_place, suturing, cutting, path_tracking).
    #[arg(long, global = true)]
    pub task: Option<String>,
    /// Runs only the informed (true) or uninformed (false) transition.
    #[arg(long, global = true)]
    pub informed: Option<bool>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize one trajectory CSV per task profile.
    Generate,
    /// Turn trajectory CSVs into one resampled local-variation pose cloud.
    Preprocess {
        #[arg(required = true)]
        trajectories: Vec<PathBuf>,
    },
    /// Anneal an arm morphology against pooled pose clouds.
    Optimize {
        #[arg(required = true)]
        clouds: Vec<PathBuf>,
    },
    /// Simulate the workspace transition with a design.
    Simulate { design: PathBuf },
    /// Dexterity of a design over a pose cloud.
    Evaluate { design: PathBuf, cloud: PathBuf },
    /// Jointly normalized dexterity of several designs over several clouds,
    /// plus each design's informed and uninformed transitions.
    Compare {
        #[arg(long = "design", required = true)]
        designs: Vec<PathBuf>,
        #[arg(long = "cloud", required = true)]
        clouds: Vec<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Preprocess { .. } => "preprocess",
            Command::Optimize { .. } => "optimize",
            Command::Simulate { .. } => "simulate",
            Command::Evaluate { .. } => "evaluate",
            Command::Compare { .. } => "compare",
        }
    }
}

/// Resolves the configuration, runs the command, and returns the run directory.
pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let mut config = RunConfig::load(cli.global.config.as_deref())?;
    if let Some(seed) = cli.global.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.global.out {
        config.out_dir = out.clone();
    }
    if let Some(jobs) = cli.global.jobs {
        config.jobs = jobs;
    }
    config.anneal.rng_seed = config.seed;
    config.validate()?;
    let task = cli
        .global
        .task
        .as_deref()
        .map(str::parse::<bimorph_core::TaskLabel>)
        .transpose()?;
    let dir = commands::create_run_dir(&config.out_dir, cli.command.name())?;
    std::fs::write(dir.join("config.toml"), config.to_toml())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Generate => commands::generate(&config, task, &dir),
        Command::Preprocess { trajectories } => commands::preprocess(&config, task, trajectories, &dir),
        Command::Optimize { clouds } => commands::optimize(&config, clouds, &dir),
        Command::Simulate { design } => commands::simulate(&config, design, cli.global.informed, &dir),
        Command::Evaluate { design, cloud } => commands::evaluate(&config, design, cloud, &dir),
        Command::Compare { designs, clouds } => commands::compare(&config, designs, clouds, cli.global.informed, &dir),
    })?;
    Ok(dir)
}
