use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// One draw from a symmetric Dirichlet(alpha, …, alpha) over `m` weights,
/// via normalized Gamma(alpha, 1) variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, alpha: f64, m: usize) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::arg(format!(
            "Dirichlet alpha must be positive, got {alpha}"
        )));
    }
    if m == 0 {
        return Err(Error::arg("Dirichlet needs at least one component"));
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::arg(e.to_string()))?;
    let draws: Vec<f64> = (0..m).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        Ok(draws.iter().map(|g| g / total).collect())
    } else {
        // Every Gamma draw underflowed (tiny alpha): the limit is a vertex.
        let mut w = vec![0.0; m];
        w[rng.random_range(0..m)] = 1.0;
        Ok(w)
    }
}

/// Convex combination of the chosen series with the given weights, after
/// cropping all of `series` to their common most-recent length.
pub fn mixup_with_weights(
    series: &[TimeSeries],
    chosen: &[usize],
    weights: &[f64],
) -> Result<TimeSeries> {
    if chosen.len() != weights.len() || chosen.is_empty() {
        return Err(Error::arg("one weight per chosen series is required"));
    }
    if chosen.iter().any(|&i| i >= series.len()) {
        return Err(Error::arg("chosen index out of range"));
    }
    let (len, values) = super::common_suffix(series)?;
    let mut out = vec![0.0; len];
    for (&i, &w) in chosen.iter().zip(weights) {
        for (o, v) in out.iter_mut().zip(&values[i]) {
            *o += w * v;
        }
    }
    super::cropped_like(&series[chosen[0]], "mixup".into(), out)
}

/// `n_variants` mixtures of `m` distinct series drawn uniformly, weights
/// from a symmetric Dirichlet(alpha).
pub fn mixup_augment(
    series: &[TimeSeries],
    m: usize,
    alpha: f64,
    n_variants: usize,
    seed: u64,
) -> Result<Vec<TimeSeries>> {
    if m < 2 {
        return Err(Error::arg("mixup combines at least two series"));
    }
    if series.len() < m {
        return Err(Error::arg(format!(
            "mixup of {m} series needs at least {m} inputs, got {}",
            series.len()
        )));
    }
    (0..n_variants)
        .map(|v| {
            let mut rng = rng_from_seed(derive_seed(seed, v as u64));
            let chosen = sample(&mut rng, series.len(), m).into_vec();
            let w = sample_dirichlet(&mut rng, alpha, m)?;
            let mut out = mixup_with_weights(series, &chosen, &w)?;
            out.id = format!("mixup-{v}");
            Ok(out)
        })
        .collect()
}
