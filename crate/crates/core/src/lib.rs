//! Encoder-decoder GAN forecasting for multivariate stock series.
//!
//! The crate is organised bottom-up:
//!
//! - [`autodiff`]: tensors, a reverse-mode tape, Adam, gradient checking
//! - [`indicators`]: RSI, stochastic RSI, EMA, MACD, Bollinger bands, log momentum
//! - [`dataset`]: CSV ingest, normalisation, windowing, splits, synthetic series
//! - [`models`]: residual blocks, the encoder-decoder generator, the CNN discriminator
//! - [`training`]: adversarial losses, gradient penalties, the training loop
//! - [`report`]: metrics, comparison tables, plot data
//! - [`cli`]: the batch pipeline behind the `edgan` binary
//!
//! Runnable walkthroughs of each layer live in the crate's `examples/`.

pub mod autodiff;
pub mod cli;
pub mod codec;
pub mod dataset;
pub mod error;
pub mod indicators;
pub mod models;
pub mod report;
pub mod training;

pub use error::{Error, Result};
