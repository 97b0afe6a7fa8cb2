//! Layer-weighted self-supervised speech features for MCI vs NC
//! classification.
//!
//! The pipeline reads per-layer encoder features ([`feature_store`]), fuses
//! them with learnable softmax weights and classifies 30-second segments with
//! a bidirectional LSTM ([`model`], [`train`]). Recordings are scored by
//! aggregating segment predictions ([`inference`]) and evaluated with
//! MCI-positive binary metrics ([`metrics`]). Audio-level augmentation lives
//! in [`perturb`]; speaker-aware data splitting in [`splits`].

pub mod error;
pub mod feature_store;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod perturb;
pub mod rng;
pub mod splits;
pub mod train;

pub use error::{Error, Result};
