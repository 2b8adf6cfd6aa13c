//! Online meta-learning of learning rates.
//!
//! A [`memory::LearningRateMemory`] maps a scalar gradient value to a
//! learning rate through locally weighted constant models. The
//! [`optim::MetaOptimizer`] keeps one memory per parameter group, scales the
//! (optionally Adam-transformed) gradient with the predicted rates, and
//! trains each memory online from the product of consecutive gradients.

pub mod data;
pub mod error;
pub mod harness;
pub mod memory;
pub mod models;
pub mod optim;
pub mod params;

pub use error::{Error, Result};
pub use memory::{LearningRateMemory, LocalModel, MemorySignal, MemorySnapshot, SignalRule};
pub use optim::{MemoryBank, MetaConfig, MetaOptimizer, Optimizer};
pub use params::{GroupShape, ParamGroup, ParamSet};
