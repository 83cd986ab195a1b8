//! Learned forward model and parameter calibration for coded-pulse LIDAR
//! depth estimation.
//!
//! The pipeline has two stages. A conditional Wasserstein GAN learns the
//! distribution of back-scattered codes as a function of eight normalized
//! camera parameters; the trained generator is then used as a differentiable
//! simulator to search for parameters that make the correlation-based depth
//! estimate stable. A synthetic camera ([`oracle`]) stands in for the
//! hardware and closes the loop.
//!
//! Everything numeric is generic over [`Scalar`]; the aliases below fix the
//! element type to `f64`, which is what the command-line tool uses.

pub mod cgan;
pub mod config;
pub mod engine;
pub mod error;
pub mod inverse;
pub mod io;
pub mod oracle;
pub mod scalar;
pub mod seed;
pub mod signal;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = engine::Tensor<f64>;
pub type Graph = engine::Graph<f64>;
pub type BinaryCode = signal::BinaryCode<f64>;
pub type CodeBatch = signal::CodeBatch<f64>;
pub type GeneratorNet = cgan::GeneratorNet<f64>;
pub type DiscriminatorNet = cgan::DiscriminatorNet<f64>;
pub type Checkpoint = cgan::Checkpoint<f64>;

pub type Tensor32 = engine::Tensor<f32>;
pub type Graph32 = engine::Graph<f32>;
pub type GeneratorNet32 = cgan::GeneratorNet<f32>;
