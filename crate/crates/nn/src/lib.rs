//! Reverse-mode autodiff over 4-D tensors, UNet and CNN surge models,
//! AdamW training and checkpoints.

pub mod checkpoint;
pub mod error;
pub mod kernels;
pub mod models;
pub mod optim;
pub mod tape;
pub mod tensor;
pub mod trainer;

pub use checkpoint::{CheckpointManifest, ModelCheckpoint};
pub use error::NnError;
pub use models::{Architecture, CnnConfig, ModelParameters, ParamSpec, UNetConfig};
pub use optim::{clip_grad_norm, cosine_lr, AdamW, AdamWConfig};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{Scalar, Tensor4};
pub use trainer::{
    evaluate_loss, split_dataset, train, train_with, HistoryRow, Sample, Split, SplitFractions, TrainConfig,
    TrainOutcome,
};
