//! Data side of a location-invariant peak storm-surge surrogate: synthetic
//! storm tracks, symmetric Holland forcing on landfall-centered windows,
//! mesh-to-grid interpolation, feature tensors, synthetic surge labels and
//! evaluation metrics.

pub mod error;
pub mod evaluation;
pub mod field;
pub mod gridding;
pub mod oracle;
pub mod tensor_file;
pub mod tracks;
pub mod windfields;

pub use error::{FormatError, ForcingError, GridError, MetricError, TrackError};
pub use field::{Field2, Mask, SurgeField};
