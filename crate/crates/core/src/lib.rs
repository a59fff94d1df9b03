//! Recurrent graph neural networks that learn simple graph algorithms on
//! small graphs and keep working on graphs orders of magnitude larger.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod export;
pub mod graph;
pub mod manifest;
pub mod matrix;
pub mod model;
pub mod nn;
pub mod taskgen;
pub mod train;

pub use checkpoint::Checkpoint;
pub use error::{Error, Result};
pub use graph::{Graph, TaskTag};
pub use matrix::Matrix;
pub use model::{ConvType, Model, ModelConfig};
