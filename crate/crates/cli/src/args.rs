use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "fseval",
    version,
    about = "Paired few-shot evaluation: splits, trials, models and tests"
)]
pub struct Cli {
    /// Worker threads for parallel steps (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Draw seeded extra/train/test splits from a corpus.
    Plan(PlanArgs),
    /// Run the external trainer on every split of a plan.
    Run(RunArgs),
    /// Draw accuracy records from the generative model.
    Simulate(SimulateArgs),
    /// Fit the hierarchical model to accuracy records.
    Fit(FitArgs),
    /// Summarize marginal or per-task accuracy differences from a fit.
    Effects(EffectsArgs),
    /// Sign-flip permutation tests with BH adjustment.
    Permtest(PermtestArgs),
    /// De-replication meta-analysis over single-subsample slices.
    Meta(MetaArgs),
    /// Spearman correlations of subsample biases between two LM types.
    Correlate(CorrelateArgs),
    /// Mean paired differences per (m, n, lm_type) in percentage points.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Plan(_) => "plan",
            Command::Run(_) => "run",
            Command::Simulate(_) => "simulate",
            Command::Fit(_) => "fit",
            Command::Effects(_) => "effects",
            Command::Permtest(_) => "permtest",
            Command::Meta(_) => "meta",
            Command::Correlate(_) => "correlate",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FramingArg {
    /// base → control, extra → treatment
    Boost,
    /// extra → control, test → treatment
    Bias,
}

impl From<FramingArg> for fseval_core::Framing {
    fn from(f: FramingArg) -> Self {
        match f {
            FramingArg::Boost => fseval_core::Framing::Boost,
            FramingArg::Bias => fseval_core::Framing::Bias,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormatArg {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectKindArg {
    Marginal,
    Conditional,
}

#[derive(Debug, Args, Serialize)]
pub struct PlanArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Corpus format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<CorpusFormatArg>,
    /// Task name recorded in manifests; defaults to the corpus file stem.
    #[arg(long)]
    pub task_id: Option<String>,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    /// Defaults to 100 / 100 / 50 / 20 for n = 50 / 100 / 200 / 500.
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RunArgs {
    #[arg(long)]
    pub plan_dir: PathBuf,
    /// Shell command template; see the README for placeholders.
    #[arg(long)]
    pub trainer_cmd: String,
    #[arg(long, default_value_t = 1)]
    pub epochs: u32,
    #[arg(long)]
    pub zero_shot: bool,
    /// Opaque configuration string passed to the trainer as PE_CONFIG.
    #[arg(long)]
    pub trainer_config: Option<String>,
    /// Per-trial timeout in seconds.
    #[arg(long, default_value_t = 3600.0)]
    pub timeout: f64,
    #[arg(long, default_value = "lm")]
    pub lm_type: String,
    /// Output directory; defaults to <plan-dir>/run.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.3)]
    pub sigma_u: f64,
    #[arg(long, default_value_t = 0.3)]
    pub sigma_v: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_w: f64,
    #[arg(long, default_value_t = 25)]
    pub tasks: usize,
    #[arg(long, default_value_t = 20)]
    pub subsamples: usize,
    #[arg(long, default_value_t = 200)]
    pub n: u32,
    #[arg(long, default_value_t = 100)]
    pub m: u32,
    #[arg(long, default_value_t = 1)]
    pub lm_types: usize,
    /// Columns that receive the (control, treatment) counts.
    #[arg(long, value_enum, default_value = "bias")]
    pub framing: FramingArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Restrict records to one setting.
#[derive(Debug, Args, Serialize, Default)]
pub struct RecordFilter {
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub n: Option<u32>,
    /// Keep only these LM types (repeatable).
    #[arg(long = "lm-type")]
    pub lm_types: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long, value_enum)]
    pub framing: FramingArg,
    #[command(flatten)]
    pub filter: RecordFilter,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, default_value_t = 500)]
    pub tune: usize,
    #[arg(long, default_value_t = 0.8)]
    pub target_accept: f64,
    /// Drop the nested subsample random effect.
    #[arg(long)]
    pub no_subsample_effect: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EffectsArgs {
    /// Output directory of `fit`.
    #[arg(long)]
    pub draws_dir: PathBuf,
    #[arg(long, value_enum, default_value = "marginal")]
    pub kind: EffectKindArg,
    /// Posterior predictive samples.
    #[arg(long, default_value_t = 4000)]
    pub count: usize,
    /// Predictive seed; defaults to the fit seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PermtestArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long, value_enum)]
    pub framing: FramingArg,
    /// Monte Carlo draws when exhaustive enumeration is too large.
    #[arg(long, default_value_t = 100_000)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MetaArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[command(flatten)]
    pub filter: RecordFilter,
    #[arg(long, default_value_t = 500)]
    pub slices: usize,
    #[arg(long, default_value_t = 0.04)]
    pub threshold: f64,
    #[arg(long, default_value_t = 2)]
    pub chains: usize,
    #[arg(long, default_value_t = 500)]
    pub draws: usize,
    #[arg(long, default_value_t = 300)]
    pub tune: usize,
    /// Tasks that must be present (repeatable).
    #[arg(long = "require-task")]
    pub require_tasks: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub records: PathBuf,
    /// Number of permuted null distributions.
    #[arg(long, default_value_t = 10)]
    pub draws_null: usize,
    /// First LM type; defaults to the first one in the file.
    #[arg(long)]
    pub lm_x: Option<String>,
    /// Second LM type; defaults to the second one in the file.
    #[arg(long)]
    pub lm_y: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
