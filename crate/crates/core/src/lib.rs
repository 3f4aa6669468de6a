//! Building blocks for training audio-visual models to reason in a
//! structured, modality-separated format.
//!
//! - [`tag_grammar`] parses and renders tagged reasoning traces.
//! - [`mask_engine`] builds causal and modality asymmetric attention masks.
//! - [`attention_core`] is a reference masked attention with gradients.
//! - [`rl_core`] holds the verifiable rewards and the GRPO objective.
//! - [`pem_pipeline`] labels each instance with its preferred evidence modality.

pub mod answer;
pub mod attention_core;
pub mod jsonl;
pub mod mask_engine;
pub mod pem_pipeline;
pub mod rl_core;
pub mod tag_grammar;
