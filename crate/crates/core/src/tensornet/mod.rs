//! Minimal deterministic neural-network engine: tensors, a layer graph with
//! freezable segments, losses, RMSprop and a binary model format.

mod error;
pub mod gradcheck;
mod io;
mod loss;
mod model;
pub mod ops;
mod optim;
mod scalar;
mod tensor;

pub use error::{NetError, Result};
pub use gradcheck::{gradient_check, layer_suite, FamilyCheck, GradCheck};
pub use io::{load_model, model_from_bytes, model_to_bytes, save_model, FORMAT_VERSION, MAGIC};
pub use loss::{loss_bce_masked, loss_mse, LossOutput, BCE_CLAMP};
pub use model::{
    head_layers, Gradients, HeadKind, HeadSpec, Init, Layer, LayerSpec, Model, ModelBuilder, Segment, Trace,
};
pub use ops::{Op, Padding};
pub use optim::{rmsprop_step, Precision, TrainConfig};
pub use scalar::Scalar;
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
