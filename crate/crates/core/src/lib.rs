//! Interactive action translation: paired-VAE embeddings, pair augmentation,
//! a conditional WGAN-GP response generator and classifier-based evaluation.

pub mod act2act;
pub mod autograd;
pub mod cluster;
pub mod dataset;
pub mod error;
pub mod iat_metrics;
pub mod nn;
pub mod pe_augment;
pub mod pipeline;
pub mod pvae;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
