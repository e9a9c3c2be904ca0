//! Group-DRO weighting of training datasets.
//!
//! Each dataset gets a reference loss from a small baseline fitted to it
//! alone. During training the excess of the current loss over that reference
//! drives an exponentiated-gradient update of a probability vector over
//! datasets, which in turn sets how often each dataset is sampled.
//!
//! Datasets are always keyed and ordered by id (`BTreeMap` order).

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{ar_fit, LinearArModel};
use crate::data::{NormStats, TimeSeries};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::stats::gaussian_nll;

pub const DEFAULT_STEP_SIZE: f64 = 0.1;
pub const DEFAULT_SMOOTHING: f64 = 0.1;

/// Fraction of each series held out when scoring a reference model.
pub const HOLDOUT_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceModel {
    Naive,
    /// AR(p) with `p` = the series' seasonal period, capped at `max_order`
    /// and by the training length.
    Ar {
        max_order: usize,
    },
}

impl Default for ReferenceModel {
    fn default() -> Self {
        ReferenceModel::Ar { max_order: 24 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMetric {
    /// Mean squared one-step error in raw units.
    #[default]
    SquaredError,
    /// Mean Gaussian NLL of one-step forecasts on the series z-normalized
    /// with its training-part statistics.
    Nll,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceFit {
    pub loss: f64,
    /// True if at least one series fell back to the naive model.
    pub fell_back: bool,
}

/// One-step predictor used for scoring: either AR or last-value.
enum OneStep {
    Naive { sigma: f64 },
    Ar(LinearArModel),
}

impl OneStep {
    fn fit(train: &[f64], kind: ReferenceModel, period: usize) -> (Self, bool) {
        let naive = || {
            let d: Vec<f64> = train.windows(2).map(|w| w[1] - w[0]).collect();
            let sigma = if d.is_empty() {
                0.0
            } else {
                (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt()
            };
            OneStep::Naive { sigma }
        };
        match kind {
            ReferenceModel::Naive => (naive(), false),
            ReferenceModel::Ar { max_order } => {
                let p = period.min(max_order).min(train.len().saturating_sub(1) / 2);
                match (p >= 1).then(|| ar_fit(train, p)) {
                    Some(Ok(m)) if !m.ridged => (OneStep::Ar(m), false),
                    _ => (naive(), true),
                }
            }
        }
    }

    fn lags(&self) -> usize {
        match self {
            OneStep::Naive { .. } => 1,
            OneStep::Ar(m) => m.order,
        }
    }

    fn predict(&self, past: &[f64]) -> f64 {
        match self {
            OneStep::Naive { .. } => past[past.len() - 1],
            OneStep::Ar(m) => m.forecast(past, 1).expect("enough lags")[0],
        }
    }

    fn sigma(&self) -> f64 {
        match self {
            OneStep::Naive { sigma } => *sigma,
            OneStep::Ar(m) => m.residual_std,
        }
    }
}

/// Held-out loss of a per-dataset baseline. Each series is split into a
/// training head and a tail of `HOLDOUT_FRACTION` of its points (at least
/// one); the baseline is fitted on the head and scored by one-step-ahead
/// forecasts over the tail. Losses are pooled over all tail points.
pub fn fit_reference(
    dataset: &[TimeSeries],
    model: ReferenceModel,
    metric: LossMetric,
) -> Result<ReferenceFit> {
    if dataset.is_empty() {
        return Err(Error::arg("reference model needs a non-empty dataset"));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    let mut fell_back = false;
    for s in dataset {
        let v = s.values();
        if v.len() < 2 {
            continue;
        }
        let test_len = ((v.len() as f64 * HOLDOUT_FRACTION).round() as usize).clamp(1, v.len() - 1);
        let split = v.len() - test_len;
        let values = match metric {
            LossMetric::SquaredError => v.to_vec(),
            LossMetric::Nll => NormStats::fit(&v[..split]).apply(v),
        };
        let (pred, fb) = OneStep::fit(&values[..split], model, s.freq.period());
        fell_back |= fb;
        let sigma = pred.sigma().max(1e-6);
        let start = split.max(pred.lags());
        for t in start..values.len() {
            let yhat = pred.predict(&values[..t]);
            total += match metric {
                LossMetric::SquaredError => (values[t] - yhat).powi(2),
                LossMetric::Nll => gaussian_nll(values[t], yhat, sigma),
            };
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::TooShort { needed: 2, got: 1 });
    }
    Ok(ReferenceFit {
        loss: total / count as f64,
        fell_back,
    })
}

/// `max(current − reference, 0)` per dataset.
pub fn excess_loss(
    current: &BTreeMap<String, f64>,
    reference: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>> {
    if !current.keys().eq(reference.keys()) {
        return Err(Error::KeyMismatch(format!(
            "current losses for {:?}, references for {:?}",
            current.keys().collect::<Vec<_>>(),
            reference.keys().collect::<Vec<_>>()
        )));
    }
    Ok(current
        .iter()
        .map(|(k, c)| (k.clone(), (c - reference[k]).max(0.0)))
        .collect())
}

/// A probability vector over datasets plus its update constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupWeights {
    pub ids: Vec<String>,
    pub weights: Vec<f64>,
    pub step_size: f64,
    pub smoothing: f64,
}

impl GroupWeights {
    /// Uniform weights over `ids`, which are sorted and must be distinct.
    pub fn uniform(
        ids: impl IntoIterator<Item = String>,
        step_size: f64,
        smoothing: f64,
    ) -> Result<Self> {
        let mut ids: Vec<String> = ids.into_iter().collect();
        ids.sort();
        if ids.is_empty() || ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::arg("dataset ids must be non-empty and distinct"));
        }
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::arg("DRO step size must be positive"));
        }
        if !(0.0..=1.0).contains(&smoothing) {
            return Err(Error::arg("DRO smoothing must lie in [0, 1]"));
        }
        let n = ids.len();
        Ok(Self {
            ids,
            weights: vec![1.0 / n as f64; n],
            step_size,
            smoothing,
        })
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.ids
            .iter()
            .position(|i| i == id)
            .map(|p| self.weights[p])
    }

    pub fn as_map(&self) -> BTreeMap<String, f64> {
        self.ids
            .iter()
            .cloned()
            .zip(self.weights.iter().copied())
            .collect()
    }

    /// Update from an excess-loss map keyed like `self.ids`.
    pub fn update(&self, excess: &BTreeMap<String, f64>) -> Result<Self> {
        if !excess.keys().eq(self.ids.iter()) {
            return Err(Error::KeyMismatch(
                "excess losses do not match weight ids".into(),
            ));
        }
        let e: Vec<f64> = excess.values().copied().collect();
        update_weights(self, &e)
    }
}

/// `w′ ∝ w·exp(η·excess)`, then `w″ = (1 − s)·w′ + s/n`, renormalized.
pub fn update_weights(w: &GroupWeights, excess: &[f64]) -> Result<GroupWeights> {
    if excess.len() != w.weights.len() {
        return Err(Error::KeyMismatch(format!(
            "{} excess values for {} datasets",
            excess.len(),
            w.weights.len()
        )));
    }
    if let Some(bad) = excess.iter().find(|e| !e.is_finite()) {
        return Err(Error::Numeric(format!("non-finite excess loss {bad}")));
    }
    let logits: Vec<f64> = w
        .weights
        .iter()
        .zip(excess)
        .map(|(wi, e)| wi.ln() + w.step_size * e)
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let n = exps.len() as f64;
    let mixed: Vec<f64> = exps
        .iter()
        .map(|x| (1.0 - w.smoothing) * x / z + w.smoothing / n)
        .collect();
    let total: f64 = mixed.iter().sum();
    Ok(GroupWeights {
        weights: mixed.iter().map(|x| x / total).collect(),
        ..w.clone()
    })
}

/// One sampled training window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchItem {
    pub dataset: String,
    pub series: usize,
    pub start: usize,
    pub len: usize,
}

impl BatchItem {
    pub fn values<'a>(&self, datasets: &'a BTreeMap<String, Vec<TimeSeries>>) -> &'a [f64] {
        &datasets[&self.dataset][self.series].values()[self.start..self.start + self.len]
    }
}

/// Draws `batch_size` windows of `window_len` points: the dataset
/// categorically by `w`, then a window uniformly over every valid
/// `(series, start)` pair in it. Datasets with no series long enough are
/// never chosen; the remaining weights are renormalized.
pub fn sample_batch(
    datasets: &BTreeMap<String, Vec<TimeSeries>>,
    w: &GroupWeights,
    batch_size: usize,
    window_len: usize,
    seed: u64,
) -> Result<Vec<BatchItem>> {
    let mut rng = rng_from_seed(seed);
    sample_batch_with(&mut rng, datasets, w, batch_size, window_len)
}

pub fn sample_batch_with<R: Rng + ?Sized>(
    rng: &mut R,
    datasets: &BTreeMap<String, Vec<TimeSeries>>,
    w: &GroupWeights,
    batch_size: usize,
    window_len: usize,
) -> Result<Vec<BatchItem>> {
    if window_len == 0 {
        return Err(Error::arg("window length must be at least 1"));
    }
    sample_windows_with(rng, datasets, w, batch_size, |_| window_len)
}

/// [`sample_batch_with`] with a window length chosen per series.
pub fn sample_windows_with<R, F>(
    rng: &mut R,
    datasets: &BTreeMap<String, Vec<TimeSeries>>,
    w: &GroupWeights,
    batch_size: usize,
    window_len: F,
) -> Result<Vec<BatchItem>>
where
    R: Rng + ?Sized,
    F: Fn(&TimeSeries) -> usize,
{
    if batch_size == 0 {
        return Err(Error::arg("batch size must be at least 1"));
    }
    if !datasets.keys().eq(w.ids.iter()) {
        return Err(Error::KeyMismatch(
            "datasets do not match weight ids".into(),
        ));
    }
    // Per dataset: cumulative window counts over its series.
    let cum: Vec<Vec<usize>> = datasets
        .values()
        .map(|series| {
            let mut acc = 0;
            series
                .iter()
                .map(|s| {
                    let len = window_len(s);
                    if len > 0 {
                        acc += (s.len() + 1).saturating_sub(len);
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let eff: Vec<f64> = w
        .weights
        .iter()
        .zip(&cum)
        .map(|(wi, c)| {
            if c.last().copied().unwrap_or(0) > 0 {
                *wi
            } else {
                0.0
            }
        })
        .collect();
    let mass: f64 = eff.iter().sum();
    if mass <= 0.0 {
        let needed = datasets
            .values()
            .flatten()
            .map(&window_len)
            .min()
            .unwrap_or(0);
        return Err(Error::TooShort {
            needed,
            got: datasets
                .values()
                .flatten()
                .map(TimeSeries::len)
                .max()
                .unwrap_or(0),
        });
    }
    let ids: Vec<&String> = datasets.keys().collect();
    let series_lists: Vec<&Vec<TimeSeries>> = datasets.values().collect();
    (0..batch_size)
        .map(|_| {
            let mut u = rng.random::<f64>() * mass;
            let mut d = eff.iter().rposition(|x| *x > 0.0).expect("positive mass");
            for (i, x) in eff.iter().enumerate() {
                if *x > 0.0 && u < *x {
                    d = i;
                    break;
                }
                u -= x;
            }
            let c = &cum[d];
            let k = rng.random_range(0..*c.last().expect("non-empty"));
            let series = c.partition_point(|&acc| acc <= k);
            let before = if series == 0 { 0 } else { c[series - 1] };
            Ok(BatchItem {
                dataset: ids[d].clone(),
                series,
                start: k - before,
                len: window_len(&series_lists[d][series]),
            })
        })
        .collect()
}

/// Weights after each of a sequence of updates, starting with `initial`.
pub fn weight_trajectory(
    initial: &GroupWeights,
    excess_seq: &[Vec<f64>],
) -> Result<Vec<GroupWeights>> {
    let mut out = vec![initial.clone()];
    for e in excess_seq {
        let next = update_weights(out.last().expect("non-empty"), e)?;
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FreqClass, Frequency};

    fn ds(values: &[&[f64]]) -> Vec<TimeSeries> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                TimeSeries::from_values(format!("s{i}"), Frequency::new(FreqClass::Day), v.to_vec())
                    .unwrap()
            })
            .collect()
    }

    fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn excess_loss_cases() {
        let r = map(&[("a", 1.0), ("b", 1.0)]);
        assert_eq!(excess_loss(&r, &r).unwrap(), map(&[("a", 0.0), ("b", 0.0)]));
        assert_eq!(
            excess_loss(&map(&[("a", 3.0), ("b", -4.0)]), &r).unwrap(),
            map(&[("a", 2.0), ("b", 0.0)])
        );
        assert!(matches!(
            excess_loss(&map(&[("a", 1.0)]), &r),
            Err(Error::KeyMismatch(_))
        ));
    }

    #[test]
    fn constant_dataset_has_zero_naive_reference() {
        let d = ds(&[&[4.0; 30], &[-2.0; 10]]);
        let r = fit_reference(&d, ReferenceModel::Naive, LossMetric::SquaredError).unwrap();
        assert_eq!(r.loss, 0.0);
        let r = fit_reference(&d, ReferenceModel::default(), LossMetric::SquaredError).unwrap();
        assert!(r.fell_back);
        assert_eq!(r.loss, 0.0);
    }

    #[test]
    fn single_short_series_reference_is_finite() {
        let d = ds(&[&[1.0, 3.0, 2.0]]);
        for metric in [LossMetric::SquaredError, LossMetric::Nll] {
            assert!(fit_reference(&d, ReferenceModel::default(), metric)
                .unwrap()
                .loss
                .is_finite());
        }
    }

    #[test]
    fn weight_update_rejects_bad_input() {
        let w = GroupWeights::uniform(["a".to_string(), "b".to_string()], 0.1, 0.0).unwrap();
        assert!(update_weights(&w, &[1.0]).is_err());
        assert!(update_weights(&w, &[f64::NAN, 0.0]).is_err());
        assert!(GroupWeights::uniform(["a".to_string(), "a".to_string()], 0.1, 0.0).is_err());
    }

    #[test]
    fn sampling_skips_datasets_without_windows() {
        let mut data = BTreeMap::new();
        data.insert("long".to_string(), ds(&[&[0.0; 20]]));
        data.insert("short".to_string(), ds(&[&[0.0; 3]]));
        let w = GroupWeights::uniform(data.keys().cloned(), 0.1, 0.1).unwrap();
        let batch = sample_batch(&data, &w, 50, 10, 1).unwrap();
        assert!(batch.iter().all(|b| b.dataset == "long" && b.start <= 10));
        assert!(sample_batch(&data, &w, 1, 30, 1).is_err());
        assert!(sample_batch(&data, &w, 0, 10, 1).is_err());
    }
}
