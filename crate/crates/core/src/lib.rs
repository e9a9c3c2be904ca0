//! Core building blocks for the hybridcast forecasting toolkit.
//!
//! Everything here works on [`data::TimeSeries`]: ingestion and calendar
//! features, STL decomposition, data augmentation, synthetic series
//! generation, dataset-weight optimisation for training mixtures, classical
//! baseline forecasters and the evaluation harness.

pub mod augment;
pub mod baselines;
pub mod data;
pub mod decomp;
pub mod dromix;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod optim;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use baselines::Forecaster;
pub use data::{CalendarFeatures, FreqClass, Frequency, NormStats, TimeSeries, Window};
pub use error::{Error, Result};
