//! Unified prediction of human attention and preference: evaluation metrics,
//! the scanpath token codec, a small reference model and its data pipeline.

pub mod codec;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod tensor;
pub mod train;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
