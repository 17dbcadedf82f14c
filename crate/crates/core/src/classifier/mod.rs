//! Shallow CNN over feature cubes: inference, training and checkpoints.

pub mod checkpoint;
pub mod layers;
pub mod network;
pub mod tensor;
pub mod train;

pub use checkpoint::Checkpoint;
pub use network::{
    argmax_prediction, batch_loss, cube_to_input, loss, Mode, Network, NetworkSpec, Prediction,
    DEFAULT_CLASSES,
};
pub use tensor::Scalar;
pub use train::{AdamState, Schedule, StepReport, TrainConfig, Trainer};
