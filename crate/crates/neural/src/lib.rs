//! Minimal differentiable array stack: a reverse-mode [`Graph`], a
//! feed-forward and a recurrent-encoder regressor, Adam and seeded MSE
//! training.

pub mod adam;
pub mod checkpoint;
pub mod graph;
pub mod network;
pub mod tensor;
pub mod train;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::Checkpoint;
pub use graph::{Gradients, Graph, Var};
pub use network::{Architecture, Backward, Network, Param, OUTPUT_DIM};
pub use tensor::Tensor;
pub use train::{evaluate_mse, train, Dataset, TrainConfig, TrainHistory};

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite value at optimizer step {step}: {what}")]
    NonFinite { what: String, step: u64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
