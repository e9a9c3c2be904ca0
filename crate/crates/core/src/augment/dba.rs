use rand::Rng;

use super::dtw::{dtw, dtw_cost};
use super::kshape::kshape_values;
use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct DbaResult {
    pub barycenter: Vec<f64>,
    /// `Σ dtw(barycenter, s).cost` before the first update and after each one.
    pub objective: Vec<f64>,
}

/// Sum of DTW costs to the barycenter plus, per barycenter cell, the sum and
/// count of the member points aligned to it.
fn align_all(barycenter: &[f64], series: &[&[f64]]) -> Result<(f64, Vec<f64>, Vec<usize>)> {
    let mut total = 0.0;
    let mut sums = vec![0.0; barycenter.len()];
    let mut counts = vec![0usize; barycenter.len()];
    for s in series {
        let r = dtw(barycenter, s)?;
        total += r.cost;
        for (i, j) in r.path {
            sums[i] += s[j];
            counts[i] += 1;
        }
    }
    Ok((total, sums, counts))
}

/// DTW barycenter averaging: alternately align every member to the current
/// average and replace each average cell with the mean of its aligned
/// points. Stops after `max_iters` updates or when the relative objective
/// improvement drops below `tol`.
pub fn dba(series: &[&[f64]], init: &[f64], max_iters: usize, tol: f64) -> Result<DbaResult> {
    if series.is_empty() || init.is_empty() || series.iter().any(|s| s.is_empty()) {
        return Err(Error::arg(
            "dba needs a non-empty init and non-empty members",
        ));
    }
    let mut barycenter = init.to_vec();
    let (mut obj, mut sums, mut counts) = align_all(&barycenter, series)?;
    let mut objective = vec![obj];
    for _ in 0..max_iters {
        if obj == 0.0 {
            break;
        }
        barycenter = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| s / c as f64)
            .collect();
        let prev = obj;
        (obj, sums, counts) = align_all(&barycenter, series)?;
        objective.push(obj);
        if prev - obj < tol * prev {
            break;
        }
    }
    Ok(DbaResult {
        barycenter,
        objective,
    })
}

/// Index of the member with the smallest total DTW cost to the others.
pub fn dtw_medoid(series: &[&[f64]]) -> Result<usize> {
    let mut best = (0, f64::INFINITY);
    for (i, a) in series.iter().enumerate() {
        let mut total = 0.0;
        for (j, b) in series.iter().enumerate() {
            if i != j {
                total += dtw_cost(a, b)?;
            }
        }
        if total < best.1 {
            best = (i, total);
        }
    }
    Ok(best.0)
}

const DBA_ITERS: usize = 10;
const DBA_TOL: f64 = 1e-4;

/// Clusters the series with k-shape, then for each cluster draws
/// `per_cluster` bootstrap resamples of its members and averages each with
/// DBA starting from the cluster medoid. Values stay on the original scale.
pub fn dba_augment(
    series: &[TimeSeries],
    k: usize,
    per_cluster: usize,
    seed: u64,
) -> Result<Vec<TimeSeries>> {
    let (_, values) = super::common_suffix(series)?;
    if k > series.len() {
        return Err(Error::arg(format!(
            "k = {k} exceeds the {} series given",
            series.len()
        )));
    }
    if per_cluster == 0 {
        return Ok(Vec::new());
    }
    let clusters = kshape_values(&values, k, derive_seed(seed, u64::MAX), 100)?;
    let mut out = Vec::with_capacity(k * per_cluster);
    for c in 0..k {
        let members = clusters.members(c);
        let refs: Vec<&[f64]> = members.iter().map(|&i| values[i].as_slice()).collect();
        let medoid = members[dtw_medoid(&refs)?];
        for j in 0..per_cluster {
            let mut rng = rng_from_seed(derive_seed(seed, ((c as u64) << 32) | j as u64));
            let sample: Vec<&[f64]> = (0..members.len())
                .map(|_| refs[rng.random_range(0..refs.len())])
                .collect();
            let avg = dba(&sample, &values[medoid], DBA_ITERS, DBA_TOL)?;
            out.push(super::cropped_like(
                &series[medoid],
                format!("{}-dba-c{c}-{j}", series[medoid].id),
                avg.barycenter,
            )?);
        }
    }
    Ok(out)
}
