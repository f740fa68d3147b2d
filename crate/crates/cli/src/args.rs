use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "exosir", version, about = "Exo-SIR epidemic simulations and fits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the ODE model and write its trajectory.
    Simulate(SimulateArgs),
    /// Run the agent-based experiment on Barabási–Albert graphs.
    Network(NetworkArgs),
    /// Random parameter sweep followed by the log-peak regression.
    Sweep(SweepArgs),
    /// Fit rates to observed case counts and compare runs with and without
    /// exogenous infection.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory [env: EXOSIR_OUT, default: out]
    #[arg(long, env = "EXOSIR_OUT", default_value = "out", hide_env = true, hide_default_value = true)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    ExoSir,
    Sir,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "exo-sir")]
    pub model: Model,
    /// Exogenous infection rate (exo-sir only)
    #[arg(long)]
    pub beta_x: Option<f64>,
    #[arg(long)]
    pub beta_e: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Initial fractions s,i_e,i_x,r [default: 999996,1,3,0 per million]
    #[arg(long, value_delimiter = ',')]
    pub initial: Option<Vec<f64>>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Channel {
    PerNode,
    SingleSource,
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    /// Levels used for each of beta_x, beta_e and gamma
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,0.9")]
    pub levels: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    /// Number of nodes
    #[arg(long, default_value_t = 150)]
    pub nodes: usize,
    /// Edges added per arriving node
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_ticks: usize,
    #[arg(long, default_value_t = 2020)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "per-node")]
    pub exo_channel: Channel,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Levels drawn per rate; the grid has k^3 points
    #[arg(long, default_value_t = 30)]
    pub k: usize,
    #[arg(long, default_value_t = 2020)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    /// Steps of the first attempt; doubled while i_e is still rising
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// State code, e.g. tn, rj, kl
    #[arg(long)]
    pub state: String,
    /// Patient-level case list CSV
    #[arg(long, requires = "states_daily", conflicts_with = "series")]
    pub raw: Option<PathBuf>,
    /// Per-state daily status CSV
    #[arg(long)]
    pub states_daily: Option<PathBuf>,
    /// Event-linked case counts CSV (date,count)
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Already aligned daily series CSV, instead of the source files
    #[arg(long, conflicts_with_all = ["raw", "states_daily", "events"])]
    pub series: Option<PathBuf>,
    /// Population per state code (TOML, `tn = 72147030`)
    #[arg(long)]
    pub pop_config: Option<PathBuf>,
    /// Overrides the configured population of the state
    #[arg(long)]
    pub population: Option<u64>,
    /// Initial horizon in days; doubled up to 4096 until both peaks are reached
    #[arg(long, default_value_t = 512)]
    pub horizon: usize,
    /// Regress on same-day values instead of the two-day average
    #[arg(long)]
    pub end_of_day: bool,
    #[command(flatten)]
    pub out: OutArgs,
}
