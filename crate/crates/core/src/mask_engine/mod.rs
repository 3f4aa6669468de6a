//! Causal and modality asymmetric attention masks.
//!
//! The modality mask blocks three query/key families on top of the causal
//! mask:
//!
//! - visual reasoning queries → audio input keys
//! - audio reasoning queries → video input keys
//! - audio reasoning queries → every position of the visual span, tags included
//!
//! Everything else keeps plain causal visibility.

mod decode;
pub mod export;
mod layout;
mod locate;
mod matrix;
mod spec;

use thiserror::Error;

pub use decode::RowMaskDecoder;
pub use layout::{LayoutError, LayoutRoles, Role, TokenLayout};
pub use locate::{locate_layout, MarkerTable};
pub use matrix::{build_causal, build_composite, build_maam, compose, incremental_row, MaskMatrix};
pub use spec::LayoutSpec;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("mask length must be at least 1")]
    ZeroLength,
    #[error("mask lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("row {row} is out of range for length {length}")]
    RowOutOfRange { row: usize, length: usize },
    #[error("{0} cells do not form a nonempty square mask")]
    NotSquare(usize),
    #[error("invalid layout: {0}")]
    Layout(#[from] LayoutError),
    #[error("invalid layout spec: {0}")]
    Spec(String),
    #[error("malformed mask record: {0}")]
    Format(String),
}
