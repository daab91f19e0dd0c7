//! Sim-to-real tactile surface classification.
//!
//! The crate covers the whole chain: mesh sampling and automatic surface
//! labeling, a small tactile image renderer, a denoising diffusion model used
//! to translate simulated images toward a target sensor domain, and a
//! domain-adversarial surface classifier. Every learned component runs on the
//! small backprop core in [`nn`].

pub mod classifier;
pub mod diffusion;
pub mod error;
pub mod geometry;
pub mod labeler;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod tactile;

pub use error::{Error, Result};
