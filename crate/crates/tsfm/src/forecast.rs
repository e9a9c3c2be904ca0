//! Recursive inference, series embeddings and the [`Forecaster`] adapter.

use hybridcast_core::stats::StudentT;
use hybridcast_core::{Error, Forecaster, Window};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::forward;
use crate::params::Params;
use crate::tokenize::tokenize_window;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastOutput {
    /// Per step, in the units of the input.
    pub dists: Vec<StudentT>,
    /// `μ` of each step.
    pub point: Vec<f64>,
    /// `1/(1 + mean σ)` with σ in normalized units.
    pub confidence: f64,
    pub patch_len: usize,
    /// Forward passes used.
    pub passes: usize,
}

/// Predicts the next patch from the current context, appends its
/// de-normalized `μ`, and repeats until `horizon` steps are covered.
pub fn forecast(params: &Params, history: Window<'_>, horizon: usize) -> Result<ForecastOutput> {
    if horizon == 0 {
        return Err(Error::arg("horizon must be at least 1").into());
    }
    if history.is_empty() {
        return Err(Error::EmptyInput("history".into()).into());
    }
    let cfg = params.config();
    let p = cfg.patch_len_for(history.freq.class);
    let passes = horizon.div_ceil(p);
    let mut values = history.values.to_vec();
    values.reserve(passes * p);
    let mut dists = Vec::with_capacity(passes * p);
    let mut sigma_norm = 0.0;
    for _ in 0..passes {
        let w = Window {
            freq: history.freq,
            start: history.start,
            values: &values,
        };
        let tk = tokenize_window(w, p, cfg.context_patches)?;
        let out = forward(params, &tk.tokens, history.freq)?;
        let next = out.dists.last().expect("at least one token");
        for d in next {
            if dists.len() < horizon {
                sigma_norm += d.sigma;
            }
            let mu = d.mu * tk.stats.std + tk.stats.mean;
            values.push(mu);
            dists.push(StudentT {
                nu: d.nu,
                mu,
                sigma: d.sigma * tk.stats.std,
            });
        }
    }
    dists.truncate(horizon);
    Ok(ForecastOutput {
        point: dists.iter().map(|d| d.mu).collect(),
        dists,
        confidence: 1.0 / (1.0 + sigma_norm / horizon as f64),
        patch_len: p,
        passes,
    })
}

/// Mean of the final hidden states over tokens holding observations.
pub fn embed_series(params: &Params, history: Window<'_>) -> Result<Vec<f64>> {
    let cfg = params.config();
    let p = cfg.patch_len_for(history.freq.class);
    let tk = tokenize_window(history, p, cfg.context_patches)?;
    let out = forward(params, &tk.tokens, history.freq)?;
    let mut emb = vec![0.0; cfg.d_model];
    let mut count = 0.0;
    for (i, t) in tk.tokens.iter().enumerate() {
        if t.is_fully_padded() {
            continue;
        }
        for (e, h) in emb.iter_mut().zip(out.hidden.row(i)) {
            *e += h;
        }
        count += 1.0;
    }
    emb.iter_mut().for_each(|e| *e /= count);
    Ok(emb)
}

/// A trained model behind the [`Forecaster`] interface.
#[derive(Debug, Clone)]
pub struct TsfmForecaster {
    pub params: Params,
    name: String,
}

impl TsfmForecaster {
    pub fn new(params: Params) -> Self {
        Self {
            params,
            name: "tsfm".into(),
        }
    }

    pub fn named(params: Params, name: impl Into<String>) -> Self {
        Self {
            params,
            name: name.into(),
        }
    }
}

impl Forecaster for TsfmForecaster {
    fn name(&self) -> &str {
        &self.name
    }

    fn predict(&self, history: Window<'_>, horizon: usize) -> hybridcast_core::Result<Vec<f64>> {
        Ok(forecast(&self.params, history, horizon)?.point)
    }

    fn confidence(&self, history: Window<'_>, horizon: usize) -> hybridcast_core::Result<f64> {
        Ok(forecast(&self.params, history, horizon)?.confidence)
    }

    fn predict_distribution(
        &self,
        history: Window<'_>,
        horizon: usize,
    ) -> hybridcast_core::Result<Option<Vec<StudentT>>> {
        Ok(Some(forecast(&self.params, history, horizon)?.dists))
    }
}
