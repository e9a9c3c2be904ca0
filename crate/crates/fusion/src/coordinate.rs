//! Small/large model cascade and distillation of the second small model.

use hybridcast_core::baselines::{baseline_confidence, LinearArModel};
use hybridcast_core::eval::BenchConfig;
use hybridcast_core::optim::{Adam, AdamConfig};
use hybridcast_core::rng::{derive_seed_str, rng_from_seed};
use hybridcast_core::{Error, Forecaster, Result, TimeSeries, Window};
use log::warn;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoordinationConfig {
    /// Confidence above which a small model's forecast is accepted.
    pub tau1: f64,
    /// Confidence above which the large model labels a hard sample as
    /// challenging; equal to `tau1` when absent.
    pub tau2: Option<f64>,
    pub lambda: f64,
    pub steps: usize,
    pub lr: f64,
    /// Samples per step; full batch when absent.
    pub batch_size: Option<usize>,
}

impl Default for CoordinationConfig {
    fn default() -> Self {
        Self {
            tau1: 0.6,
            tau2: None,
            lambda: 1.0,
            steps: 300,
            lr: 0.01,
            batch_size: None,
        }
    }
}

impl CoordinationConfig {
    pub fn tau2(&self) -> f64 {
        self.tau2.unwrap_or(self.tau1)
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |t: f64| (0.0..=1.0).contains(&t);
        if !in_unit(self.tau1) || !in_unit(self.tau2()) {
            return Err(Error::arg("thresholds must lie in [0, 1]"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::arg("lambda must be finite and non-negative"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::arg("batch_size must be positive"));
        }
        Ok(())
    }
}

/// Recursive AR forecast together with `∂ŷ_t/∂θ` for
/// `θ = (intercept, coef_1..coef_p)`, propagated forward through the fed
/// back predictions (and the integration of differenced models).
pub fn ar_forecast_with_sensitivity(
    model: &LinearArModel,
    history: &[f64],
    horizon: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let p = model.order;
    if history.len() < model.min_history() {
        return Err(Error::TooShort {
            needed: model.min_history(),
            got: history.len(),
        });
    }
    let base: Vec<f64> = if model.differenced {
        history.windows(2).map(|w| w[1] - w[0]).collect()
    } else {
        history.to_vec()
    };
    let mut buf: Vec<f64> = base[base.len() - p..].to_vec();
    let mut dbuf: Vec<Vec<f64>> = vec![vec![0.0; p + 1]; p];
    let mut out = Vec::with_capacity(horizon);
    let mut sens = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let n = buf.len();
        // Same summation order as `LinearArModel::forecast`, so the values
        // agree bit for bit.
        let next = model.intercept + (0..p).map(|i| model.coef[i] * buf[n - 1 - i]).sum::<f64>();
        let mut d = vec![0.0; p + 1];
        d[0] = 1.0;
        for i in 0..p {
            d[i + 1] += buf[n - 1 - i];
            for (dj, lj) in d.iter_mut().zip(&dbuf[n - 1 - i]) {
                *dj += model.coef[i] * lj;
            }
        }
        buf.remove(0);
        buf.push(next);
        dbuf.remove(0);
        dbuf.push(d.clone());
        out.push(next);
        sens.push(d);
    }
    if model.differenced {
        let mut level = history[history.len() - 1];
        let mut dlevel = vec![0.0; p + 1];
        for (v, d) in out.iter_mut().zip(sens.iter_mut()) {
            level += *v;
            *v = level;
            for (a, b) in dlevel.iter_mut().zip(d.iter()) {
                *a += b;
            }
            d.copy_from_slice(&dlevel);
        }
    }
    Ok((out, sens))
}

/// One history window of the training set with its split label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleClass {
    Easy,
    /// Hard, and the large model is not confident either.
    Hard,
    /// Hard for s1, confident for the large model.
    Challenging,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinationOutcome {
    pub s2: LinearArModel,
    pub easy: usize,
    pub hard: usize,
    pub challenging: usize,
    /// Training objective before each step.
    pub losses: Vec<f64>,
    /// Set when s2 was returned unchanged for lack of challenging samples.
    pub notice: Option<String>,
}

struct Target {
    history: Vec<f64>,
    target: Vec<f64>,
    /// `λ/(n_class · H · scale²)`, the sample's share of the objective.
    coef: f64,
}

fn scale_sq(history: &[f64]) -> f64 {
    let s = history.iter().map(|v| v.abs()).sum::<f64>() / history.len() as f64 + 1e-8;
    s * s
}

/// Objective and gradient of `L(θ)` over `targets`.
fn objective(
    model: &LinearArModel,
    targets: &[&Target],
    horizon: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.order + 1];
    for t in targets {
        let (f, d) = ar_forecast_with_sensitivity(model, &t.history, horizon)?;
        for ((fv, tv), dv) in f.iter().zip(&t.target).zip(&d) {
            let r = fv - tv;
            loss += t.coef * r * r;
            for (g, s) in grad.iter_mut().zip(dv) {
                *g += t.coef * 2.0 * r * s;
            }
        }
    }
    Ok((loss, grad))
}

fn with_theta(model: &LinearArModel, theta: &[f64]) -> LinearArModel {
    LinearArModel {
        intercept: theta[0],
        coef: theta[1..].to_vec(),
        ..model.clone()
    }
}

/// Classifies each window by confidence, then trains a copy of `s1` on
/// `mean_easy ‖f_s2 − f_s1‖² + λ·mean_challenging ‖f_s2 − f_large‖²`, each
/// sample's squared error divided by `H · (mean |history|)²`.
pub fn coordinate_train(
    s1: &LinearArModel,
    large: &dyn Forecaster,
    dataset: &[TimeSeries],
    bench: &BenchConfig,
    cfg: &CoordinationConfig,
    seed: u64,
) -> Result<CoordinationOutcome> {
    cfg.validate()?;
    let h = bench.horizon;
    let mut easy = Vec::new();
    let mut challenging = Vec::new();
    let mut hard = 0;
    for s in dataset {
        let Some(origins) = bench.origins(s.len()) else {
            continue;
        };
        for o in origins {
            let w = s.window(0..o);
            if w.len() < s1.min_history() {
                continue;
            }
            if baseline_confidence(s1, w.values) > cfg.tau1 {
                easy.push((w.values.to_vec(), s1.forecast(w.values, h)?));
            } else if large.confidence(w, h)? > cfg.tau2() {
                challenging.push((w.values.to_vec(), large.predict(w, h)?));
            } else {
                hard += 1;
            }
        }
    }
    let (n_easy, n_chal) = (easy.len(), challenging.len());
    let mut outcome = CoordinationOutcome {
        s2: s1.clone(),
        easy: n_easy,
        hard: hard + n_chal,
        challenging: n_chal,
        losses: Vec::new(),
        notice: None,
    };
    if n_chal == 0 {
        let msg = "no challenging samples; s2 is an exact copy of s1".to_string();
        warn!("{msg}");
        outcome.notice = Some(msg);
        return Ok(outcome);
    }
    let mk = |(history, target): (Vec<f64>, Vec<f64>), weight: f64, n: usize| Target {
        coef: weight / (n as f64 * h as f64 * scale_sq(&history)),
        history,
        target,
    };
    let targets: Vec<Target> = easy
        .into_iter()
        .map(|e| mk(e, 1.0, n_easy))
        .chain(challenging.into_iter().map(|c| mk(c, cfg.lambda, n_chal)))
        .collect();

    let mut theta: Vec<f64> = std::iter::once(s1.intercept)
        .chain(s1.coef.iter().copied())
        .collect();
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr), [theta.len()]);
    let mut rng = rng_from_seed(derive_seed_str(seed, "coordinate"));
    let all: Vec<&Target> = targets.iter().collect();
    for _ in 0..cfg.steps {
        let model = with_theta(s1, &theta);
        let batch: Vec<&Target> = match cfg.batch_size {
            Some(b) if b < all.len() => sample(&mut rng, all.len(), b)
                .into_iter()
                .map(|i| all[i])
                .collect(),
            _ => all.clone(),
        };
        // Minibatch sums are rescaled to estimate the full objective.
        let scale = all.len() as f64 / batch.len() as f64;
        let (loss, mut grad) = objective(&model, &batch, h)?;
        grad.iter_mut().for_each(|g| *g *= scale);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("coordination training diverged".into()));
        }
        outcome.losses.push(loss * scale);
        adam.step([(theta.as_mut_slice(), grad.as_slice())]);
    }
    outcome.s2 = with_theta(s1, &theta);
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    S1,
    S2,
    Large,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinatedForecast {
    pub point: Vec<f64>,
    pub route: Route,
    pub s1_confidence: f64,
    /// Absent when s1 was accepted.
    pub s2_confidence: Option<f64>,
}

/// s1 if its confidence exceeds τ₁, else s2 if its confidence does, else
/// the large model.
pub fn coordinate_infer(
    s1: &LinearArModel,
    s2: &LinearArModel,
    large: &dyn Forecaster,
    history: Window<'_>,
    horizon: usize,
    cfg: &CoordinationConfig,
) -> Result<CoordinatedForecast> {
    cfg.validate()?;
    let c1 = baseline_confidence(s1, history.values);
    if c1 > cfg.tau1 {
        return Ok(CoordinatedForecast {
            point: s1.forecast(history.values, horizon)?,
            route: Route::S1,
            s1_confidence: c1,
            s2_confidence: None,
        });
    }
    let c2 = baseline_confidence(s2, history.values);
    let (point, route) = if c2 > cfg.tau1 {
        (s2.forecast(history.values, horizon)?, Route::S2)
    } else {
        (large.predict(history, horizon)?, Route::Large)
    };
    Ok(CoordinatedForecast {
        point,
        route,
        s1_confidence: c1,
        s2_confidence: Some(c2),
    })
}
