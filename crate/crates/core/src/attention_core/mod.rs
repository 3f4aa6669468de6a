//! Reference masked attention in double precision, its gradients, the
//! span-level attention allocation report and a synthetic leakage probe.

mod allocation;
mod attention;
mod dense;
mod leakage;

use thiserror::Error;

pub use allocation::{
    attention_allocation, default_query_span, AllocationReport, LayerAllocation, WeightDump, DEFAULT_LAST_K,
};
pub use attention::{
    attention_backward, gradient_check, masked_attention, multi_head_attention, relative_error,
    sum_loss_gradients, AttentionGrads, AttentionInputs, AttentionOutput, AttentionWeights,
    GRADIENT_REL_FLOOR,
};
pub use dense::Matrix;
pub use leakage::{leakage_probe, leakage_probe_with, LeakageConfig, LeakageReport, LeakageSizes};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttentionError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("row {0} has no visible key")]
    FullyBlockedRow(usize),
    #[error("finite-difference step {0} is outside [1e-6, 1e-3]")]
    InvalidStep(f64),
    #[error("last_k = {last_k} is not in 1..={layers}")]
    InvalidWindow { last_k: usize, layers: usize },
    #[error("query span is empty")]
    EmptyQuerySpan,
    #[error("query span puts no attention mass on either reasoning span")]
    ZeroSpanMass,
}
