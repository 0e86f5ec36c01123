//! Synthetic ECG heartbeat generation and evaluation.
//!
//! Small fully-connected generative models (a classic GAN, a VAE-GAN and a
//! Wasserstein-loss variant) are trained on segmented heartbeats, and the
//! beats they produce are scored against real ones with dynamic time warping,
//! discrete Fréchet and Euclidean distances. A two-class classifier
//! experiment measures what synthetic beats add to an imbalanced dataset.

pub mod augmentation;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod plot;
pub mod rng;
pub mod synth;
pub mod templates;

pub use error::{Error, Result};
