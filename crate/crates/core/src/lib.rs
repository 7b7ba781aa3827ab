//! Residual convolutional denoising of photon-limited (Poisson) images.
//!
//! The crate covers the whole chain: Poisson degradation of clean images, Anscombe
//! variance stabilization and binning, a 20-layer residual network whose layers each
//! emit one noise-component channel, from-scratch backpropagation with Adam, class
//! fine-tuning, and an evaluation bench (PSNR tables, win rates, per-layer profiles).

pub mod cli;
pub mod error;
pub mod evalbench;
pub mod imaging;
pub mod network;
pub mod noise;
pub mod synth;
pub mod tensor;
pub mod training;
pub mod vst;

pub use error::{Error, Result};
