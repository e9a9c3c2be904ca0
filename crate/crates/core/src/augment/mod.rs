//! Data-driven augmentation strategies: frequency aggregation, moving block
//! bootstrap over STL residuals, DTW barycenter averaging within k-shape
//! clusters, and Dirichlet mixup.
//!
//! All randomized entry points take an explicit seed and are bit-for-bit
//! reproducible. Per-variant streams are derived with
//! [`crate::rng::derive_seed`], never shared.

mod dba;
mod dtw;
mod freq;
mod kshape;
mod mbb;
mod mixup;

pub use dba::{dba, dba_augment, dtw_medoid, DbaResult};
pub use dtw::{dtw, dtw_cost, DtwResult};
pub use freq::{frequency_aggregate, AggregateMode};
pub use kshape::{kshape_cluster, kshape_values, ncc_best, sbd, zscore, ClusterAssignment};
pub use mbb::{mbb_augment, mbb_variants, MbbVariant};
pub use mixup::{mixup_augment, mixup_with_weights, sample_dirichlet};

use crate::data::TimeSeries;
use crate::error::{Error, Result};

/// Crops every series to the shortest length, keeping the most recent
/// points. Returns the cropped values and each series' start offset.
pub(crate) fn common_suffix(series: &[TimeSeries]) -> Result<(usize, Vec<Vec<f64>>)> {
    let len = series
        .iter()
        .map(TimeSeries::len)
        .min()
        .ok_or_else(|| Error::arg("no series given"))?;
    let values = series
        .iter()
        .map(|s| s.values()[s.len() - len..].to_vec())
        .collect();
    Ok((len, values))
}

/// Series built from cropped values of `source`, re-anchored at the crop.
pub(crate) fn cropped_like(
    source: &TimeSeries,
    id: String,
    values: Vec<f64>,
) -> Result<TimeSeries> {
    let offset = source.len() - values.len();
    TimeSeries::new(id, source.freq, source.timestamp(offset as i64), values)
}
