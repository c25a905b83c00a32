//! Adaptive hybrid focal-entropy (AHFE) loss family for K-class softmax
//! classifiers.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! - [`loss`]: categorical cross-entropy, focal, entropy and AHFE losses,
//!   plus frequency-adaptive class weights.
//! - [`grad`]: analytic gradients of every loss with respect to the logits
//!   and a seeded central-difference checker.
//! - [`model`] and [`train`]: linear / one-hidden-layer classifiers trained
//!   with mini-batch SGD + momentum.
//! - [`data`]: imbalanced Gaussian blob generation and stratified splits.
//! - [`metrics`]: confusion matrix, per-class and macro precision/recall/F1.
//! - [`rng`]: the portable counter-based generator behind all randomness.
//!
//! File formats, CSV and the command line live in the `ahfe-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod data;
pub mod error;
pub mod grad;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use loss::{
    adaptive_weights, ahfe_batch, ahfe_batch_weighted, ahfe_per_sample, cce_batch, cce_per_sample, entropy_per_sample,
    focal_per_sample, softmax, BatchLossResult, ClassWeights, LogitVector, LossConfig, LossId, OneHotLabel,
    ProbabilityVector, WeightMode,
};
