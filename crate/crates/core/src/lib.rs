//! Neural-network side of the weak-label pre-training toolkit: a small
//! engine generic over `f32`/`f64` and builders for the image and text
//! model families.

pub mod models;
pub mod tensornet;

pub use tensornet::{Model, NetError, Scalar, Tensor};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Model32 = Model<f32>;
pub type Model64 = Model<f64>;
