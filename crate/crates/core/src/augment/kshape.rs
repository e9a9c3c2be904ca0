//! k-shape clustering under the shape-based distance
//! `SBD(x, y) = 1 − max_s NCC_s(x, y)`.
//!
//! Centroids are updated as the SBD-aligned mean of the members (each member
//! is shifted to its best alignment with the current centroid, the shifted
//! copies are averaged and z-normalized), not by the eigenvector extraction
//! of the original algorithm. Initial centroids are picked k-means++ style
//! with probability proportional to squared SBD.

use rand::Rng;

use crate::data::{NormStats, TimeSeries};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    /// z-normalized centroid shapes.
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == cluster)
            .collect()
    }
}

pub fn zscore(values: &[f64]) -> Vec<f64> {
    NormStats::fit(values).apply(values)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Maximum normalized cross-correlation and the shift attaining it. Shift
/// `s` pairs `x[i + s]` with `y[i]`. Zero-norm inputs correlate at 0, except
/// two zero vectors, which are treated as identical.
pub fn ncc_best(x: &[f64], y: &[f64]) -> (f64, isize) {
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return (if nx == ny { 1.0 } else { 0.0 }, 0);
    }
    let (n, m) = (x.len() as isize, y.len() as isize);
    let mut best = (f64::NEG_INFINITY, 0isize);
    // Visit shifts by increasing |s| so ties resolve to the smallest shift.
    let max_shift = (n - 1).max(m - 1);
    for k in 0..=2 * max_shift {
        let s = if k % 2 == 0 { k / 2 } else { -(k + 1) / 2 };
        if s <= -m || s >= n {
            continue;
        }
        let lo = 0.max(-s);
        let hi = m.min(n - s);
        let cc: f64 = (lo..hi).map(|i| x[(i + s) as usize] * y[i as usize]).sum();
        if cc > best.0 {
            best = (cc, s);
        }
    }
    (best.0 / (nx * ny), best.1)
}

pub fn sbd(x: &[f64], y: &[f64]) -> f64 {
    (1.0 - ncc_best(x, y).0).max(0.0)
}

/// `y` shifted to its best alignment with `x` (zero padded, length of `x`).
fn align_to(x: &[f64], y: &[f64]) -> Vec<f64> {
    let (_, s) = ncc_best(x, y);
    (0..x.len() as isize)
        .map(|j| {
            let src = j - s;
            if src >= 0 && (src as usize) < y.len() {
                y[src as usize]
            } else {
                0.0
            }
        })
        .collect()
}

fn shape_mean(members: &[&Vec<f64>], reference: &[f64]) -> Vec<f64> {
    let len = reference.len();
    let mut acc = vec![0.0; len];
    let zero_ref = reference.iter().all(|v| *v == 0.0);
    for m in members {
        let aligned = if zero_ref {
            (*m).clone()
        } else {
            align_to(reference, m)
        };
        for (a, v) in acc.iter_mut().zip(aligned) {
            *a += v;
        }
    }
    let k = members.len() as f64;
    zscore(&acc.iter().map(|a| a / k).collect::<Vec<_>>())
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(c, cen)| (c, sbd(x, cen)))
        .fold(
            (0, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
}

pub fn kshape_cluster(
    series: &[TimeSeries],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<ClusterAssignment> {
    let (_, values) = super::common_suffix(series)?;
    kshape_values(&values, k, seed, max_iters)
}

/// k-shape on equal-length raw sequences (z-normalized internally).
pub fn kshape_values(
    data: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<ClusterAssignment> {
    let n = data.len();
    if k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    if k > n {
        return Err(Error::arg(format!("k = {k} exceeds the {n} series given")));
    }
    let len = data[0].len();
    if len == 0 || data.iter().any(|d| d.len() != len) {
        return Err(Error::arg("k-shape needs non-empty series of equal length"));
    }
    let z: Vec<Vec<f64>> = data.iter().map(|d| zscore(d)).collect();
    let mut rng = rng_from_seed(seed);

    let mut chosen = vec![rng.random_range(0..n)];
    while chosen.len() < k {
        let d2: Vec<f64> = (0..n)
            .map(|i| {
                chosen
                    .iter()
                    .map(|&c| sbd(&z[i], &z[c]))
                    .fold(f64::INFINITY, f64::min)
                    .powi(2)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if *w > 0.0 && u < *w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            while d2[idx] == 0.0 {
                idx -= 1;
            }
            idx
        } else {
            // Remaining candidates are all duplicates of chosen centers.
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(pick);
    }
    let mut centroids: Vec<Vec<f64>> = chosen.iter().map(|&c| z[c].clone()).collect();

    let mut labels: Vec<usize> = Vec::new();
    let mut iterations = 0;
    for it in 0..max_iters.max(1) {
        iterations = it + 1;
        let mut new_labels: Vec<usize> = z.iter().map(|x| nearest(x, &centroids).0).collect();
        if it == 0 {
            // Pin the seeds to their own clusters so duplicates cannot
            // leave a cluster empty at the start.
            for (c, &i) in chosen.iter().enumerate() {
                new_labels[i] = c;
            }
        }
        repair_empty(&mut new_labels, &z, &centroids, k);
        if new_labels == labels {
            break;
        }
        labels = new_labels;
        for (c, cen) in centroids.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> =
                (0..n).filter(|&i| labels[i] == c).map(|i| &z[i]).collect();
            *cen = shape_mean(&members, cen);
        }
    }
    Ok(ClusterAssignment {
        labels,
        centroids,
        iterations,
    })
}

/// Moves the worst-fitting point of a multi-member cluster into each empty
/// cluster.
fn repair_empty(labels: &mut [usize], z: &[Vec<f64>], centroids: &[Vec<f64>], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let donor = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| {
                sbd(&z[a], &centroids[labels[a]]).total_cmp(&sbd(&z[b], &centroids[labels[b]]))
            })
            .expect("k <= n guarantees a donor");
        labels[donor] = empty;
    }
}
