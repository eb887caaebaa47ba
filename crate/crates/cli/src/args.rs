use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "sideband", version, about = "Quantum-noise spectra of passive optical networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a network description.
    Validate(NetArgs),
    /// Sweep the noise spectrum of a detector combination.
    Simulate(SimulateArgs),
    /// Run the entangled-beam phase-measurement scenario.
    Scenario(ScenarioArgs),
    /// Cross-check the analytic engine against the Monte-Carlo simulation.
    Oracle(OracleArgs),
    /// Interferometer delay and measurement-frequency design.
    Design(DesignArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("network").required(true).args(["net", "preset"])))]
pub struct NetArgs {
    /// Network description file.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Bundled network by name (mz_phase, mz_amplitude, coherent_loss).
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub network: NetArgs,
    /// Frequency grid LO:HI:STEP (units allowed, e.g. 15MHz:25MHz:0.5MHz).
    #[arg(long)]
    pub freqs: Option<String>,
    /// sum | diff | single:DET | weighted:DET=W,... | measure:NAME
    #[arg(long)]
    pub combo: Option<String>,
    /// Parameter override NAME.attr=VALUE (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Recorded in the run manifest.
    #[arg(long, env = "SIDEBAND_SEED")]
    pub seed: Option<u64>,
    /// Output file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario parameter override KEY=VALUE (repeatable), e.g. visibility=1.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, env = "SIDEBAND_SEED")]
    pub seed: Option<u64>,
    /// Output file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    /// Amplitude-quadrature correlation (sum signal of both beams).
    AmpSum,
    /// Phase-quadrature correlation (difference signals of both beams).
    PhaseDiff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioName {
    Paper,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("target").required(true).args(["net", "preset", "scenario"])))]
pub struct OracleArgs {
    /// Network description file.
    #[arg(long)]
    pub net: Option<PathBuf>,
    /// Bundled network by name.
    #[arg(long)]
    pub preset: Option<String>,
    /// Built-in scenario (use with --quantity).
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioName>,
    /// Scenario correlation to check.
    #[arg(long, value_enum, requires = "scenario")]
    pub quantity: Option<Quantity>,
    /// Combination for network targets (same forms as `simulate`).
    #[arg(long, conflicts_with = "scenario")]
    pub combo: Option<String>,
    /// Analysis frequency; defaults to the scenario frequency or the first
    /// measurement frequency of the network.
    #[arg(long)]
    pub freq: Option<String>,
    /// Override applied to both the engine and the simulated network.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Override applied to the simulated network only (mismatch injection).
    #[arg(long = "perturb", value_name = "KEY=VALUE")]
    pub perturb: Vec<String>,
    #[arg(long, env = "SIDEBAND_SEED")]
    pub seed: Option<u64>,
    /// Number of analyzer segments K.
    #[arg(long, default_value_t = 4096)]
    pub segments: usize,
    /// Samples per segment.
    #[arg(long, default_value_t = 544)]
    pub segment_len: usize,
    /// Simulation sample rate; every delay must be a whole number of samples.
    #[arg(long, default_value = "164MHz")]
    pub sample_rate: String,
    /// Also write the simulated detector streams to this file.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Output file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["frep", "fm"])))]
pub struct DesignArgs {
    /// Pulse repetition rate.
    #[arg(long, requires = "n")]
    pub frep: Option<String>,
    /// Pulse spacings held by the long arm.
    #[arg(long, requires = "frep")]
    pub n: Option<u32>,
    /// Measurement frequency.
    #[arg(long, conflicts_with_all = ["frep", "n"])]
    pub fm: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Output file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
