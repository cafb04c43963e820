//! Distilling task-specific knowledge from high-dimensional word embeddings
//! into low-dimensional ones.
//!
//! The crate is `no_std` + `alloc`. Everything here is a pure function of its
//! inputs: random generators are passed in explicitly and wall-clock time comes
//! through the [`training::Clock`] trait, so the std companion crate owns all
//! IO, file formats and timing.
//!
//! Modules:
//! - [`math`]: dense forward/backward kernels (affine, tanh, temperature softmax,
//!   cross-entropy, inverted dropout).
//! - [`embeddings`]: vocabulary, look-up table, encoding layer and folding.
//! - [`data`]: labeled sentiment trees, samples, vocabulary building, splits.
//! - [`model`]: the mean-pooling sentence classifier and its gradients.
//! - [`training`]: mini-batch SGD, decay schedules, grid search, restarts.
//! - [`distillation`]: the three compared regimes and teacher soft targets.
//! - [`report`]: comparison tables.
//! - [`synthetic`]: a generated task with a known low-rank labeling rule.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod distillation;
pub mod embeddings;
mod error;
pub mod gradcheck;
pub mod math;
pub mod model;
pub mod report;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};

/// Seeded generator used across the toolkit.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the toolkit generator from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
