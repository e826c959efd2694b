//! Integrated-gradients attribution for autoregressive LSTM sequence models and
//! the GAMA per-position importance statistic, with synthetic motif benchmarks.
//!
//! The pipeline: train an LSTM on positive-only sequences while keeping its
//! initial weights as a reference model, attribute both models with integrated
//! gradients over every input/output token pair, and compare the per-position
//! attribution distributions of the two models.

pub mod attribution;
pub mod dataio;
pub mod error;
pub mod evalbench;
pub mod gama;
pub mod pipeline;
pub mod provenance;
pub mod seqmodel;
pub mod synthgen;

pub use error::{Error, Result};
