use std::io;

use surge_core::FormatError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("autograd contract violated: {0}")]
    Autograd(String),
    #[error("non-finite loss {loss} at epoch {epoch}, step {step} (lr {lr:e})")]
    NonFinite {
        epoch: usize,
        step: usize,
        lr: f64,
        loss: f64,
    },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}
