//! The `avr` command-line tool.
//!
//! Each subcommand is a thin shell over one `avr_core` operation. Commands
//! return an [`Outcome`] so the binary and the tests share one code path.

pub mod args;
pub mod commands;
pub mod config;

use std::path::PathBuf;

use avr_core::attention_core::AttentionError;
use avr_core::jsonl::JsonlError;
use avr_core::mask_engine::MaskError;
use avr_core::pem_pipeline::PipelineError;
use avr_core::rl_core::RlError;
use thiserror::Error;

pub use args::{Cli, Command};
pub use config::AppConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Jsonl { path: PathBuf, source: JsonlError },
    #[error("config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("id mismatch: {0}")]
    IdMismatch(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Rl(#[from] RlError),
}

/// What a command produced. `success` is false when the command ran but
/// recorded errors (failed instances, nothing labeled).
#[derive(Debug, Clone)]
pub struct Outcome {
    pub text: String,
    pub json: serde_json::Value,
    pub success: bool,
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = AppConfig::load_or_default(cli.config.as_deref())?;
    match &cli.command {
        Command::Annotate(a) => commands::annotate::run(a, &cfg),
        Command::Validate(a) => commands::validate::run(a, &cfg),
        Command::Mask(a) => commands::tools::mask(a),
        Command::GrpoStep(a) => commands::tools::grpo_step(a, &cfg),
        Command::AttnReport(a) => commands::tools::attn_report(a, &cfg),
        Command::Leakage(a) => commands::tools::leakage(a, &cfg),
        Command::Config => Ok(Outcome {
            text: cfg.to_toml(),
            json: serde_json::to_value(&cfg).expect("config serializes"),
            success: true,
        }),
    }
}
