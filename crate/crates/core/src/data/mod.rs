//! Dataset ingestion and synthesis.

mod batches;
mod dynamics;
mod idx;
mod labeled;

pub use batches::{sequential_batches, BatchIterator};
pub use dynamics::{
    synth_dynamics_stream, DynamicsStream, Standardizer, Variant, GENERATOR_VERSION, INPUT_DIM,
};
pub use idx::{encode_idx, parse_idx, read_idx, IdxElement, IdxTensor};
pub use labeled::{synthetic_digits, LabeledDataset};
