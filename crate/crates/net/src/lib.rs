//! A small, deterministic convolutional network engine in `f64`.
//!
//! Layers cover standard, depthwise and pointwise convolution, max/average
//! pooling, dense, sigmoid/ELU/softmax, with hand-written backward passes.
//! Training uses Adam, seeded shuffling and early stopping on validation
//! loss. [`zoo`] builds the LeNet-, VGG- and MobileNet-style classifiers and
//! [`checkpoint`] stores them with their label map.

pub mod checkpoint;
mod error;
pub mod graph;
pub mod layer;
pub mod ops;
pub mod optim;
pub mod par;
pub mod tensor;
pub mod train;
pub mod zoo;

pub use checkpoint::Checkpoint;
pub use error::{NetError, Result};
pub use graph::{backprop, ModelGraph, ParamSet};
pub use layer::LayerSpec;
pub use ops::{Activation, PoolMode};
pub use optim::{adam_step, AdamConfig, AdamState};
pub use par::Exec;
pub use tensor::Tensor;
pub use train::{evaluate, train, train_observed, train_with, EpochRecord, Evaluation, TensorSet, TrainConfig, TrainHistory};
pub use zoo::{Architecture, ZooConfig};
