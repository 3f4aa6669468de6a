use std::path::PathBuf;

use avr_core::rl_core::KlEstimator;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Modality-separated reasoning toolkit: preference annotation, reward
/// scoring, attention masks, GRPO and attention diagnostics.
#[derive(Parser, Debug)]
#[command(name = "avr", version, about)]
pub struct Cli {
    /// TOML config file; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print a machine-readable JSON summary instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Probe each instance under audio, video and audio+video and assign
    /// its preferred evidence modality.
    Annotate(AnnotateArgs),
    /// Score structured traces against gold labels.
    Validate(ValidateArgs),
    /// Build the causal + modality mask for a layout.
    Mask(MaskArgs),
    /// Evaluate the GRPO objective and its gradient on rollout groups.
    GrpoStep(GrpoArgs),
    /// Report how much attention a query span gives the audio vs visual span.
    AttnReport(AttnReportArgs),
    /// Measure direct cross-modal attention flow on a synthetic stack.
    Leakage(LeakageArgs),
    /// Print the effective config (defaults merged with --config).
    Config,
}

#[derive(Args, Debug)]
pub struct AnnotateArgs {
    /// Dataset JSONL, one instance per line [default: paths.input].
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,

    /// Decision records JSONL, one per probed instance [default: paths.output].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Also write the labeled subset here [default: paths.labeled].
    #[arg(long, value_name = "FILE")]
    pub labeled: Option<PathBuf>,

    /// Stats report path [default: paths.report, else OUT with .report.txt].
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,

    /// Replay paths.mock_script and embed offline instead of calling the endpoint.
    #[arg(long)]
    pub mock: bool,

    /// Concurrent instances [default: pipeline.parallelism].
    #[arg(long, value_name = "N")]
    pub parallelism: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Trace JSONL with `id` and `text`.
    #[arg(long, value_name = "FILE")]
    pub traces: PathBuf,

    /// Label JSONL with `id`, `pem` and `answer`.
    #[arg(long, value_name = "FILE")]
    pub labels: PathBuf,

    /// Scored JSONL output; only the summary is printed when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MaskFormat {
    /// One line of 0/1 per query row.
    Grid,
    /// Run-length encoded binary.
    Rle,
}

#[derive(Args, Debug)]
pub struct MaskArgs {
    /// Layout spec TOML (role ranges, or tokens + markers).
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,

    /// Write the full mask here.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Print the visibility row of query i over keys 0..=i.
    #[arg(long, value_name = "I")]
    pub row: Option<usize>,

    #[arg(long, value_enum, default_value_t = MaskFormat::Grid)]
    pub format: MaskFormat,

    /// Causal mask only.
    #[arg(long)]
    pub no_maam: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KlArg {
    K3,
    K2,
}

impl From<KlArg> for KlEstimator {
    fn from(k: KlArg) -> Self {
        match k {
            KlArg::K3 => KlEstimator::K3,
            KlArg::K2 => KlEstimator::K2,
        }
    }
}

#[derive(Args, Debug)]
pub struct GrpoArgs {
    /// Rollout JSONL: group_id, rewards, logp_new, logp_old, logp_ref.
    #[arg(long, value_name = "FILE")]
    pub rollouts: PathBuf,

    /// Clip range [default: grpo.clip_alpha].
    #[arg(long)]
    pub alpha: Option<f64>,

    /// KL coefficient [default: grpo.kl_beta].
    #[arg(long)]
    pub beta: Option<f64>,

    /// Advantage stabilizer [default: grpo.eps_stab].
    #[arg(long)]
    pub eps: Option<f64>,

    /// KL estimator [default: grpo.kl_estimator].
    #[arg(long, value_enum)]
    pub kl: Option<KlArg>,

    /// Per-group results JSONL.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AttnReportArgs {
    /// Weights JSONL, one layer per line (`shape` + row-major `data`).
    #[arg(long, value_name = "FILE")]
    pub weights: PathBuf,

    /// Layout spec TOML.
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,

    /// Final layers to aggregate [default: attention.last_k].
    #[arg(long, value_name = "K")]
    pub last_k: Option<usize>,

    /// Query positions, e.g. `12,13` or `12-15` [default: summary span].
    #[arg(long, value_name = "LIST")]
    pub query: Option<String>,
}

#[derive(Args, Debug)]
pub struct LeakageArgs {
    /// RNG seed [default: seed].
    #[arg(long)]
    pub seed: Option<u64>,

    /// Run with the causal mask only.
    #[arg(long)]
    pub no_maam: bool,
}
