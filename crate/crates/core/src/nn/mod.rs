//! Minimal double-precision tensor and layer kit sufficient for a DenseNet
//! with row-wise batch normalization: model construction, training,
//! prediction, gradient verification, and serialization.
//!
//! Layers implement explicit forward/backward passes instead of a tape; the
//! dense-block wiring (each layer consumes the concatenation of the block
//! input and all previous layer outputs) is handled by the model driver,
//! which stores only the small per-unit outputs and rebuilds concatenations
//! during the backward pass.

pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod model;
pub mod serialize;
pub mod tensor;
pub mod train;

pub use layers::{Affine, Conv2d, RowwiseBatchNorm};
pub use loss::softmax_cross_entropy;
pub use model::{
    build_model, dense_block_forward, dense_block_output_channels, Model, ModelConfig, ModelKind,
};
pub use serialize::{load_model, save_model};
pub use tensor::Tensor4;
pub use train::{train, training_accuracy, warm_start, EpochStats, TrainConfig, Trainer};
