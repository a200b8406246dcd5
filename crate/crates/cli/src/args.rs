use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ranorch", version, about = "Intent-driven RAN orchestration over a simulated cluster")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Emit one JSON document on stdout instead of tables.
    #[arg(long, global = true)]
    pub json: bool,
    /// Simulation seed.
    #[arg(long, global = true, env = "RANORCH_SEED")]
    pub seed: Option<u64>,
    /// JSON settings file; flags and environment take precedence.
    #[arg(long, global = true, env = "RANORCH_CONFIG")]
    pub config: Option<PathBuf>,
    /// Cluster seed file.
    #[arg(long, global = true, env = "RANORCH_CLUSTER")]
    pub cluster: Option<PathBuf>,
    /// Component catalog file.
    #[arg(long, global = true, env = "RANORCH_CATALOG")]
    pub catalog: Option<PathBuf>,
    /// Task timing model file.
    #[arg(long, global = true, env = "RANORCH_TIMING")]
    pub timing: Option<PathBuf>,
    /// Performance model file.
    #[arg(long, global = true, env = "RANORCH_PERFORMANCE")]
    pub performance: Option<PathBuf>,
    /// RU inventory file.
    #[arg(long, global = true, env = "RANORCH_INVENTORY")]
    pub inventory: Option<PathBuf>,
    /// UE database file.
    #[arg(long = "ue-db", global = true, env = "RANORCH_UE_DB")]
    pub ue_db: Option<PathBuf>,
    /// Directory of the results store; in-memory when unset.
    #[arg(long, global = true, env = "RANORCH_STORE")]
    pub store: Option<PathBuf>,
    /// Use the base task durations without seeded jitter.
    #[arg(long = "no-jitter", global = true)]
    pub no_jitter: bool,
    /// Wall-clock pacing: simulated seconds per wall second (0 = as fast as possible).
    #[arg(long, global = true, env = "RANORCH_PACE")]
    pub pace: Option<f64>,
    /// Chat-completions endpoint for the remote backend.
    #[arg(long = "llm-url", global = true, env = "RANORCH_LLM_URL")]
    pub llm_url: Option<String>,
    /// Model name sent to the remote backend.
    #[arg(long = "llm-model", global = true, env = "RANORCH_LLM_MODEL")]
    pub llm_model: Option<String>,
    /// More log output on stderr (-v, -vv).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn a natural-language intent into a validated configuration.
    Intent(IntentArgs),
    /// Run deployment and test files through their pipelines.
    Run(RunArgs),
    /// Inspect and operate the cluster.
    #[command(subcommand)]
    Cluster(ClusterCommand),
    /// Converge the cluster onto a directory of declarations.
    Reconcile(ReconcileArgs),
    /// Evaluate an agent backend over the prompt corpus.
    Corpus(CorpusArgs),
    /// Deployments, runs and simulated time.
    Status,
    /// Advance simulated time.
    Advance(AdvanceArgs),
    /// Keep one simulation alive and read commands from stdin, one per line.
    Serve,
}

/// Commands accepted on a `serve` input line.
#[derive(Debug, Parser)]
#[command(name = "", no_binary_name = true, disable_version_flag = true)]
pub struct ServeLine {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Deploy,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Scripted,
    Remote,
}

#[derive(Debug, Args)]
pub struct IntentArgs {
    /// The request, in plain words.
    pub text: String,
    #[arg(long, value_enum, default_value = "deploy")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "scripted")]
    pub backend: BackendArg,
    /// Scripted backend: make the offline model take detours first.
    #[arg(long)]
    pub adversarial: bool,
    /// Chain into the matching pipeline once the config validates.
    #[arg(long)]
    pub execute: bool,
    /// Test mode with --execute: deploy this scenario file first.
    #[arg(long, value_name = "FILE")]
    pub deploy: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub max_iterations: u32,
    /// Agent wall budget in seconds.
    #[arg(long, default_value_t = 120)]
    pub timeout: u64,
    /// Write the per-iteration trace as JSON lines.
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Deployment file; repeat to deploy several scenarios side by side.
    #[arg(long, value_name = "FILE")]
    pub deploy: Vec<PathBuf>,
    /// Test file; tests run one after another once deployments are up.
    #[arg(long, value_name = "FILE")]
    pub test: Vec<PathBuf>,
    /// Run the tests against this scenario instead of the one in the file.
    #[arg(long)]
    pub scenario: Option<u32>,
    /// UE serials to use, one per UE in the test file.
    #[arg(long = "ue", value_name = "SERIAL")]
    pub ues: Vec<String>,
    /// Write every task record as JSON lines.
    #[arg(long, value_name = "FILE")]
    pub ledger: Option<PathBuf>,
    /// Tear the deployments down afterwards.
    #[arg(long)]
    pub teardown: bool,
}

#[derive(Debug, Subcommand)]
pub enum ClusterCommand {
    /// List nodes with their pool, state and free resources.
    Nodes,
    /// Add a node and provision it into a pool.
    Add(AddArgs),
    /// Move a node to another machine-config pool.
    Relabel(RelabelArgs),
    /// Fail a node and print the recovery timeline.
    Fail(FailArgs),
    /// Bring a failed node back.
    Recover {
        node: String,
    },
    /// Stored test results, optionally exported as CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct AddArgs {
    /// Node spec as JSON.
    #[arg(long, value_name = "FILE", conflicts_with = "like", required_unless_present = "like")]
    pub spec: Option<PathBuf>,
    /// Copy the hardware of an existing node.
    #[arg(long, value_name = "NODE", requires = "id")]
    pub like: Option<String>,
    /// Id of the new node (with --like).
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long)]
    pub pool: String,
    /// Advance time until provisioning finishes.
    #[arg(long)]
    pub wait: bool,
}

#[derive(Debug, Args)]
pub struct RelabelArgs {
    pub node: String,
    pub pool: String,
    /// Advance time until the node is back.
    #[arg(long)]
    pub wait: bool,
}

#[derive(Debug, Args)]
pub struct FailArgs {
    pub node: String,
    /// Seconds before the control plane notices.
    #[arg(long, default_value_t = 40)]
    pub detect_delay: u64,
    /// Seconds before eviction, `never`, or `default` (300).
    #[arg(long, default_value = "default")]
    pub evict_timeout: String,
    /// Deploy this scenario first instead of the built-in one.
    #[arg(long, value_name = "FILE")]
    pub deploy: Option<PathBuf>,
    /// Seconds of simulated time to follow after the failure.
    #[arg(long, default_value_t = 600)]
    pub horizon: u64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub scenario: Option<u32>,
    #[arg(long)]
    pub stack: Option<String>,
    /// Node family, e.g. gh200.
    #[arg(long)]
    pub family: Option<String>,
    /// Write one CSV row per sample to this file.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconcileArgs {
    /// Directory of deployment and test files.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub passes: u32,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus file; the bundled one when unset.
    #[arg(long, value_name = "FILE")]
    pub file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "scripted")]
    pub backend: BackendArg,
    #[arg(long, default_value_t = 3)]
    pub reps: u32,
    #[arg(long)]
    pub adversarial: bool,
    #[arg(long, default_value_t = 120)]
    pub timeout: u64,
}

#[derive(Debug, Args)]
pub struct AdvanceArgs {
    /// Simulated seconds.
    pub seconds: f64,
}
