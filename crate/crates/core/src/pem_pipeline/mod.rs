//! Preferred-evidence-modality annotation.
//!
//! Each instance is probed with audio only, video only and both. A setting
//! is solvable when enough sampled answers are correct and the sampled
//! chains of thought agree with each other; the pattern of solvable settings
//! decides the label or the reason to discard the instance.

mod annotate;
mod embedder;
pub mod http;
mod sampler;
mod solvability;
mod types;

use thiserror::Error;

pub use annotate::{annotate, AnnotationOutcome, InstanceFailure, StatsReport};
pub use embedder::{EmbedError, HashingEmbedder, LookupEmbedder, TextEmbedder};
pub use http::{ChatSampler, EmbedderKind, EndpointConfig, HttpEmbedder, PromptTemplate};
pub use sampler::{CotSampler, GoldEchoSampler, SamplingError, ScriptEntry, ScriptedSampler};
pub use solvability::{accuracy_rate, consistency, decide_pem, solvable};
pub use types::{
    Decision, DiscardReason, Instance, Media, PemRecord, PipelineConfig, ProbeSetting, Sample, SampleSet,
    SettingRecords, SolvabilityRecord,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("instance id {0:?} appears more than once")]
    DuplicateId(String),
    #[error("instance {0:?} has an empty gold answer")]
    EmptyGold(String),
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("sample set is empty")]
    EmptySamples,
    #[error("{id}: {source}")]
    Sampling { id: String, source: SamplingError },
    #[error("{id}: {source}")]
    Embedding { id: String, source: EmbedError },
}
