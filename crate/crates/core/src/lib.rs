//! Stochastic temporal convolutional networks.
//!
//! Auto-regressive sequence models that pair a stack of dilated causal
//! convolutions with a top-down hierarchy of Gaussian latent variables,
//! trained by a per-step evidence lower bound. Deterministic WaveNet
//! baselines share the same convolutional backbone.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod latent;
pub mod model;
pub mod observation;
pub mod params;
pub mod real;
pub mod seqdata;
pub mod tcn;
pub mod tensor;
pub mod train;

pub use error::{Result, StcnError};
pub use model::{ElboBreakdown, Model, ModelConfig, Variant};
pub use real::Real;
pub use seqdata::{SequenceBatch, SequenceSet};
