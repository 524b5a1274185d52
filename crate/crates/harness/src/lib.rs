//! Experiment harness: datasets and splits, metrics, the pre-train →
//! fine-tune → freeze-sweep protocol, and support code for the CLI.

pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod features;
pub mod metrics;
pub mod split;
pub mod toy;
pub mod train;

pub use error::{HarnessError, Result};
