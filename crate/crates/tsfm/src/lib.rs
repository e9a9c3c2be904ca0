//! A small decoder-only transformer that forecasts Student-T distributions
//! over patches of a time series.
//!
//! Series are cut into patches whose length depends on the sampling
//! frequency. Each patch becomes a token embedding (patch values, calendar
//! features and a frequency embedding). Tokens pass through pre-norm causal
//! self-attention and mixture-of-experts feed-forward layers. The head emits
//! `(ν, μ, σ)` for every position of the next patch.
//!
//! Training minimizes the next-patch negative log-likelihood with Adam. It
//! can reweight datasets by group DRO ([`hybridcast_core::dromix`]).
//! Gradients come from a small reverse-mode tape ([`tape`]), which
//! [`gradcheck`] verifies against finite differences.

pub mod config;
pub mod error;
pub mod forecast;
pub mod gradcheck;
pub mod mat;
pub mod model;
pub mod params;
pub mod tape;
pub mod tokenize;
pub mod train;

pub use config::{DroMode, DroSettings, ModelConfig, TrainConfig};
pub use error::{Result, TsfmError};
pub use forecast::{embed_series, forecast, ForecastOutput, TsfmForecaster};
pub use mat::Mat;
pub use model::{forward, loss_and_grad, nll_loss, ForwardOutput, Sample};
pub use params::Params;
pub use tokenize::{tokenize, tokenize_window, PatchToken, Tokenized};
pub use train::{sample_len, train, train_from, train_observed, training_sample, TrainOutcome};
