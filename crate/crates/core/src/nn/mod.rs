//! Minimal network engine: layer specs, forward/backward passes, loss,
//! SGD, training loop and checkpoints.

pub mod checkpoint;
pub mod kernels;
pub mod loss;
pub mod model;
pub mod optim;
pub mod spec;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use loss::softmax_cross_entropy;
pub use model::{ActivationTrace, Backward, Gradients, LayerParams, Mode, Model};
pub use optim::{Sgd, TrainConfig};
pub use spec::{
    alexnet_variant_with, audionet_with, build_alexnet_variant, build_audionet, ArchOptions,
    BiasMode, LayerSpec, ModelSpec,
};
pub use train::{predict, train, ExampleSource, StepReport};
