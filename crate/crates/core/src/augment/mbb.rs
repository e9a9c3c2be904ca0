use rand::Rng;

use crate::data::TimeSeries;
use crate::decomp::{stl_decompose, Decomposition};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// One bootstrap realization and the residual blocks it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct MbbVariant {
    pub series: TimeSeries,
    /// Start index (into the residual) of each concatenated block, in order.
    /// The last block may be truncated to fit the series length.
    pub block_starts: Vec<usize>,
}

/// Moving block bootstrap of the STL residual.
///
/// Blocks of `block_len` consecutive residuals are drawn uniformly, with
/// replacement, from all `T − block_len + 1` overlapping positions and
/// concatenated until the original length is reached. Each variant is
/// `trend + seasonal + resampled residual`.
pub fn mbb_variants(
    series: &TimeSeries,
    period: usize,
    block_len: usize,
    n_variants: usize,
    seed: u64,
) -> Result<(Decomposition, Vec<MbbVariant>)> {
    let n = series.len();
    if period < 2 || n < 2 * period {
        return Err(Error::TooShort {
            needed: 2 * period.max(2),
            got: n,
        });
    }
    if block_len < 2 || block_len > n {
        return Err(Error::arg(format!(
            "block length {block_len} must lie in [2, {n}]"
        )));
    }
    let decomp = stl_decompose(series, period, 2)?;
    let base = decomp.structural();
    let n_starts = n - block_len + 1;

    let variants = (0..n_variants)
        .map(|v| {
            let mut rng = rng_from_seed(derive_seed(seed, v as u64));
            let mut starts = Vec::with_capacity(n.div_ceil(block_len));
            let mut values = Vec::with_capacity(n);
            while values.len() < n {
                let s = rng.random_range(0..n_starts);
                starts.push(s);
                let take = block_len.min(n - values.len());
                values.extend(
                    decomp.residual[s..s + take]
                        .iter()
                        .zip(&base[values.len()..values.len() + take])
                        .map(|(r, b)| b + r),
                );
            }
            let series = series.with_values(format!("{}-mbb{v}", series.id), values)?;
            Ok(MbbVariant {
                series,
                block_starts: starts,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((decomp, variants))
}

pub fn mbb_augment(
    series: &TimeSeries,
    period: usize,
    block_len: usize,
    n_variants: usize,
    seed: u64,
) -> Result<Vec<TimeSeries>> {
    mbb_variants(series, period, block_len, n_variants, seed)
        .map(|(_, vs)| vs.into_iter().map(|v| v.series).collect())
}
