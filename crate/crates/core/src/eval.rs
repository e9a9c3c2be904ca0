//! Accuracy metrics, the rolling-origin benchmark, and the skill report.
//!
//! Aggregation order is fixed: per-window metrics are averaged over the
//! windows of a series, then over the series of a dataset. The reported
//! `fa` is `1 − wmape` of the aggregated value, so the identity holds
//! bit-for-bit in every report row.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::Forecaster;
use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::simulate::skill_suite;

fn check_lengths(truth: &[f64], forecast: &[f64]) -> Result<()> {
    if truth.is_empty() || truth.len() != forecast.len() {
        return Err(Error::arg(format!(
            "truth and forecast lengths must match and be non-zero ({} vs {})",
            truth.len(),
            forecast.len()
        )));
    }
    Ok(())
}

/// MAPE over the points with nonzero truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    /// `None` when every truth value was zero.
    pub value: Option<f64>,
    pub skipped: usize,
}

pub fn mape(truth: &[f64], forecast: &[f64]) -> Result<Mape> {
    check_lengths(truth, forecast)?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (y, f) in truth.iter().zip(forecast) {
        if *y != 0.0 {
            sum += ((y - f) / y).abs();
            used += 1;
        }
    }
    Ok(Mape {
        value: (used > 0).then(|| sum / used as f64),
        skipped: truth.len() - used,
    })
}

/// `Σ|y − ŷ| / Σ|y|`.
pub fn wmape(truth: &[f64], forecast: &[f64]) -> Result<f64> {
    check_lengths(truth, forecast)?;
    let num: f64 = truth.iter().zip(forecast).map(|(y, f)| (y - f).abs()).sum();
    let den: f64 = truth.iter().map(|y| y.abs()).sum();
    if den == 0.0 {
        return Err(Error::arg("WMAPE is undefined for an all-zero truth"));
    }
    Ok(num / den)
}

/// Forecast accuracy `1 − wmape`.
pub fn fa(truth: &[f64], forecast: &[f64]) -> Result<f64> {
    wmape(truth, forecast).map(|w| 1.0 - w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub horizon: usize,
    pub n_origins: usize,
    /// Steps between consecutive origins.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Minimum history before the earliest origin.
    #[serde(default = "default_min_context")]
    pub min_context: usize,
}

fn default_stride() -> usize {
    1
}
fn default_min_context() -> usize {
    8
}

impl BenchConfig {
    pub fn new(horizon: usize, n_origins: usize) -> Self {
        Self {
            horizon,
            n_origins,
            stride: default_stride(),
            min_context: default_min_context(),
        }
    }

    /// Forecast origins for a series of length `len`, latest first, or
    /// `None` if the earliest leaves less than `min_context` history.
    pub fn origins(&self, len: usize) -> Option<Vec<usize>> {
        let span = self.horizon + (self.n_origins - 1) * self.stride;
        if len < span + self.min_context {
            return None;
        }
        Some(
            (0..self.n_origins)
                .map(|j| len - self.horizon - j * self.stride)
                .collect(),
        )
    }
}

/// Metrics of one model on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub dataset: String,
    pub mape: Option<f64>,
    pub one_minus_mape: Option<f64>,
    pub wmape: f64,
    pub fa: f64,
    pub nll: Option<f64>,
    pub windows: usize,
    pub series: usize,
    pub skipped_series: usize,
    /// Windows left out of WMAPE because their truth was all zero.
    pub zero_truth_windows: usize,
    /// Truth points left out of MAPE because they were zero.
    pub mape_skipped_points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn get(&self, model: &str, dataset: &str) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.dataset == dataset)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "model",
            "dataset",
            "mape",
            "one_minus_mape",
            "wmape",
            "fa",
            "nll",
            "windows",
            "series",
            "skipped_series",
            "zero_truth_windows",
            "mape_skipped_points",
        ])
        .map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                r.dataset.clone(),
                opt(r.mape),
                opt(r.one_minus_mape),
                r.wmape.to_string(),
                r.fa.to_string(),
                opt(r.nll),
                r.windows.to_string(),
                r.series.to_string(),
                r.skipped_series.to_string(),
                r.zero_truth_windows.to_string(),
                r.mape_skipped_points.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Numeric(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Numeric(format!("csv encoding: {e}"))
}

/// Per-series window averages; `None` fields had no usable window.
#[derive(Debug, Default)]
struct SeriesScore {
    wmape: Option<f64>,
    mape: Option<f64>,
    nll: Option<f64>,
    windows: usize,
    zero_truth_windows: usize,
    mape_skipped: usize,
}

fn mean_opt(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn score_series(
    model: &dyn Forecaster,
    s: &TimeSeries,
    origins: &[usize],
    horizon: usize,
) -> Result<SeriesScore> {
    let mut w = Vec::new();
    let mut m = Vec::new();
    let mut nll = Vec::new();
    let mut out = SeriesScore::default();
    for &o in origins {
        let history = s.window(0..o);
        let truth = &s.values()[o..o + horizon];
        let pred = model.predict(history, horizon)?;
        if pred.len() != horizon || pred.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "{} returned an invalid forecast for `{}`",
                model.name(),
                s.id
            )));
        }
        match wmape(truth, &pred) {
            Ok(v) => w.push(v),
            Err(_) => out.zero_truth_windows += 1,
        }
        let mp = mape(truth, &pred)?;
        out.mape_skipped += mp.skipped;
        if let Some(v) = mp.value {
            m.push(v);
        }
        if let Some(dist) = model.predict_distribution(history, horizon)? {
            let total: f64 = dist.iter().zip(truth).map(|(d, y)| d.nll(*y)).sum();
            nll.push(total / horizon as f64);
        }
        out.windows += 1;
    }
    out.wmape = mean_opt(&w);
    out.mape = mean_opt(&m);
    out.nll = mean_opt(&nll);
    Ok(out)
}

/// Rolling-origin evaluation of every model on every dataset. Series too
/// short for the configured origins are skipped with a warning.
pub fn rolling_benchmark(
    models: &[&dyn Forecaster],
    datasets: &[(String, Vec<TimeSeries>)],
    cfg: &BenchConfig,
) -> Result<MetricReport> {
    if cfg.horizon == 0 || cfg.n_origins == 0 || cfg.stride == 0 {
        return Err(Error::arg(
            "horizon, origins and stride must all be positive",
        ));
    }
    let mut rows = Vec::new();
    for model in models {
        for (name, series) in datasets {
            let scored: Vec<Option<SeriesScore>> = series
                .par_iter()
                .map(|s| match cfg.origins(s.len()) {
                    None => Ok(None),
                    Some(o) => score_series(*model, s, &o, cfg.horizon).map(Some),
                })
                .collect::<Result<_>>()?;
            let skipped = scored.iter().filter(|s| s.is_none()).count();
            if skipped > 0 {
                warn!(
                    "{name}: {skipped} series too short for {} origins at horizon {}",
                    cfg.n_origins, cfg.horizon
                );
            }
            let ok: Vec<&SeriesScore> = scored.iter().flatten().collect();
            let pick = |f: fn(&SeriesScore) -> Option<f64>| -> Vec<f64> {
                ok.iter().filter_map(|s| f(s)).collect()
            };
            let Some(wm) = mean_opt(&pick(|s| s.wmape)) else {
                warn!("{name}: no scorable windows for {}", model.name());
                continue;
            };
            let mp = mean_opt(&pick(|s| s.mape));
            rows.push(MetricRow {
                model: model.name().to_string(),
                dataset: name.clone(),
                mape: mp,
                one_minus_mape: mp.map(|v| 1.0 - v),
                wmape: wm,
                fa: 1.0 - wm,
                nll: mean_opt(&pick(|s| s.nll)),
                windows: ok.iter().map(|s| s.windows).sum(),
                series: ok.len(),
                skipped_series: skipped,
                zero_truth_windows: ok.iter().map(|s| s.zero_truth_windows).sum(),
                mape_skipped_points: ok.iter().map(|s| s.mape_skipped).sum(),
            });
        }
    }
    Ok(MetricReport { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillRow {
    pub skill: String,
    pub fa: f64,
    pub wmape: f64,
    pub windows: usize,
}

/// Default benchmark used by [`skill_report`].
pub fn skill_bench() -> BenchConfig {
    BenchConfig {
        horizon: 12,
        n_origins: 3,
        stride: 12,
        min_context: 48,
    }
}

/// FA of `model` on each of the seven skill presets, in suite order.
pub fn skill_report(model: &dyn Forecaster, seed: u64) -> Result<Vec<SkillRow>> {
    let cfg = skill_bench();
    skill_suite(seed)?
        .into_iter()
        .map(|set| {
            let rep = rolling_benchmark(&[model], &[(set.skill.to_string(), set.series)], &cfg)?;
            let row = rep.rows.into_iter().next().ok_or_else(|| {
                Error::Numeric(format!("no scorable windows for skill {}", set.skill))
            })?;
            Ok(SkillRow {
                skill: set.skill.to_string(),
                fa: row.fa,
                wmape: row.wmape,
                windows: row.windows,
            })
        })
        .collect()
}
