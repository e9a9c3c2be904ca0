//! Learned routing: a one-hidden-layer network maps series features to a
//! softmax weight per pool member.

use hybridcast_core::eval::BenchConfig;
use hybridcast_core::optim::{Adam, AdamConfig};
use hybridcast_core::rng::{derive_seed_str, rng_from_seed};
use hybridcast_core::{Error, Result, TimeSeries, Window};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::Embedder;
use crate::pool::ModelPool;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouterMode {
    /// Cross-entropy against the member with the lowest absolute error.
    BestMemberCe,
    /// Scaled squared error of the weighted combination.
    EndToEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouterConfig {
    /// Network family; only `mlp` is implemented.
    pub arch: String,
    pub hidden: usize,
    pub mode: RouterMode,
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
}

fn default_arch() -> String {
    "mlp".into()
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self {
            arch: default_arch(),
            hidden: 32,
            mode: RouterMode::BestMemberCe,
            steps: 500,
            lr: 0.01,
            seed: 0,
        }
    }
}

/// One training window: features of the history, every member's forecast
/// and the realized values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingExample {
    pub dataset: String,
    pub features: Vec<f64>,
    pub forecasts: Vec<Vec<f64>>,
    pub truth: Vec<f64>,
}

impl RoutingExample {
    /// Member with the smallest total absolute error (ties → lower index).
    pub fn best_member(&self) -> usize {
        let err = |f: &Vec<f64>| {
            f.iter()
                .zip(&self.truth)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        };
        let mut best = 0;
        for k in 1..self.forecasts.len() {
            if err(&self.forecasts[k]) < err(&self.forecasts[best]) {
                best = k;
            }
        }
        best
    }
}

/// Rolling-origin examples from every series long enough for `bench`.
pub fn routing_examples(
    pool: &ModelPool,
    embedder: &dyn Embedder,
    datasets: &[(String, Vec<TimeSeries>)],
    bench: &BenchConfig,
) -> Result<Vec<RoutingExample>> {
    let mut out = Vec::new();
    for (name, series) in datasets {
        let per_series: Vec<Vec<RoutingExample>> = series
            .par_iter()
            .map(|s| {
                let Some(origins) = bench.origins(s.len()) else {
                    return Ok(Vec::new());
                };
                origins
                    .into_iter()
                    .map(|o| {
                        let history = s.window(0..o);
                        Ok(RoutingExample {
                            dataset: name.clone(),
                            features: embedder.embed(history)?,
                            forecasts: pool.forecasts(history, bench.horizon)?,
                            truth: s.values()[o..o + bench.horizon].to_vec(),
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        out.extend(per_series.into_iter().flatten());
    }
    Ok(out)
}

/// Network weights plus the feature standardization fitted on training
/// examples. Matrices are row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterParams {
    pub members: Vec<String>,
    pub embedder: String,
    pub feat_mean: Vec<f64>,
    pub feat_scale: Vec<f64>,
    pub hidden: usize,
    /// `F × H`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `H × K`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

struct Activations {
    h: Vec<f64>,
    weights: Vec<f64>,
    xs: Vec<f64>,
}

impl RouterParams {
    /// All weights zero: every input maps to the uniform vector.
    pub fn zeros(
        features: usize,
        hidden: usize,
        members: Vec<String>,
        embedder: impl Into<String>,
    ) -> Self {
        let k = members.len();
        Self {
            members,
            embedder: embedder.into(),
            feat_mean: vec![0.0; features],
            feat_scale: vec![1.0; features],
            hidden,
            w1: vec![0.0; features * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * k],
            b2: vec![0.0; k],
        }
    }

    pub fn n_features(&self) -> usize {
        self.feat_mean.len()
    }

    pub fn n_members(&self) -> usize {
        self.b2.len()
    }

    fn activations(&self, features: &[f64]) -> Activations {
        let (f, hd, k) = (self.n_features(), self.hidden, self.n_members());
        let xs: Vec<f64> = (0..f)
            .map(|i| (features[i] - self.feat_mean[i]) / self.feat_scale[i])
            .collect();
        let h: Vec<f64> = (0..hd)
            .map(|j| (self.b1[j] + (0..f).map(|i| xs[i] * self.w1[i * hd + j]).sum::<f64>()).tanh())
            .collect();
        let z: Vec<f64> = (0..k)
            .map(|c| self.b2[c] + (0..hd).map(|j| h[j] * self.w2[j * k + c]).sum::<f64>())
            .collect();
        Activations {
            weights: softmax(&z),
            h,
            xs,
        }
    }

    /// Simplex weight per member.
    pub fn weights(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.n_features() {
            return Err(Error::arg(format!(
                "router expects {} features, got {}",
                self.n_features(),
                features.len()
            )));
        }
        Ok(self.activations(features).weights)
    }

    /// Trainable values in the order `w1, b1, w2, b2`.
    pub fn flat(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        let (a, b, c) = (self.w1.len(), self.b1.len(), self.w2.len());
        self.w1.copy_from_slice(&v[..a]);
        self.b1.copy_from_slice(&v[a..a + b]);
        self.w2.copy_from_slice(&v[a + b..a + b + c]);
        self.b2.copy_from_slice(&v[a + b + c..]);
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn combined(weights: &[f64], forecasts: &[Vec<f64>]) -> Vec<f64> {
    (0..forecasts[0].len())
        .map(|t| weights.iter().zip(forecasts).map(|(w, f)| w * f[t]).sum())
        .collect()
}

/// Scale of an example for the end-to-end loss: mean |truth|.
fn truth_scale(truth: &[f64]) -> f64 {
    truth.iter().map(|v| v.abs()).sum::<f64>() / truth.len() as f64 + 1e-8
}

/// Mean training loss and its gradient in [`RouterParams::flat`] order.
pub fn router_loss_grad(
    params: &RouterParams,
    examples: &[RoutingExample],
    mode: RouterMode,
) -> (f64, Vec<f64>) {
    let (f, hd, k) = (params.n_features(), params.hidden, params.n_members());
    let mut gw1 = vec![0.0; f * hd];
    let mut gb1 = vec![0.0; hd];
    let mut gw2 = vec![0.0; hd * k];
    let mut gb2 = vec![0.0; k];
    let n = examples.len() as f64;
    let mut total = 0.0;
    for ex in examples {
        let act = params.activations(&ex.features);
        let w = &act.weights;
        let dz: Vec<f64> = match mode {
            RouterMode::BestMemberCe => {
                let b = ex.best_member();
                total += -w[b].max(f64::MIN_POSITIVE).ln();
                (0..k).map(|c| w[c] - f64::from(u8::from(c == b))).collect()
            }
            RouterMode::EndToEnd => {
                let yhat = combined(w, &ex.forecasts);
                let h = ex.truth.len() as f64;
                let s2 = truth_scale(&ex.truth).powi(2);
                let resid: Vec<f64> = yhat.iter().zip(&ex.truth).map(|(p, y)| p - y).collect();
                total += resid.iter().map(|r| r * r).sum::<f64>() / (h * s2);
                let dw: Vec<f64> = ex
                    .forecasts
                    .iter()
                    .map(|fk| {
                        fk.iter().zip(&resid).map(|(a, r)| 2.0 * r * a).sum::<f64>() / (h * s2)
                    })
                    .collect();
                let dot: f64 = w.iter().zip(&dw).map(|(a, b)| a * b).sum();
                (0..k).map(|c| w[c] * (dw[c] - dot)).collect()
            }
        };
        for c in 0..k {
            gb2[c] += dz[c] / n;
        }
        for j in 0..hd {
            let mut dh = 0.0;
            for c in 0..k {
                gw2[j * k + c] += act.h[j] * dz[c] / n;
                dh += params.w2[j * k + c] * dz[c];
            }
            let da = dh * (1.0 - act.h[j] * act.h[j]) / n;
            gb1[j] += da;
            for i in 0..f {
                gw1[i * hd + j] += act.xs[i] * da;
            }
        }
    }
    (total / n, [gw1, gb1, gw2, gb2].concat())
}

/// Fits a router on precomputed examples. Training is full-batch Adam and
/// deterministic per `cfg.seed`.
pub fn fit_router(
    examples: &[RoutingExample],
    members: Vec<String>,
    embedder: impl Into<String>,
    cfg: &RouterConfig,
) -> Result<RouterParams> {
    if cfg.arch != "mlp" {
        return Err(Error::arg(format!(
            "router architecture `{}` is not implemented; use `mlp`",
            cfg.arch
        )));
    }
    if members.len() < 2 {
        return Err(Error::arg(format!(
            "routing needs at least 2 members, got {}",
            members.len()
        )));
    }
    let first = examples
        .first()
        .ok_or_else(|| Error::EmptyInput("routing examples".into()))?;
    if cfg.hidden == 0 {
        return Err(Error::arg("router needs at least one hidden unit"));
    }
    let f = first.features.len();
    if let Some(bad) = examples
        .iter()
        .find(|e| e.features.len() != f || e.forecasts.len() != members.len() || e.truth.is_empty())
    {
        return Err(Error::arg(format!(
            "inconsistent routing example from {}: {} features, {} forecasts",
            bad.dataset,
            bad.features.len(),
            bad.forecasts.len()
        )));
    }
    let mut p = RouterParams::zeros(f, cfg.hidden, members, embedder);
    for i in 0..f {
        let col: Vec<f64> = examples.iter().map(|e| e.features[i]).collect();
        let m = hybridcast_core::stats::mean(&col);
        let s = hybridcast_core::stats::std_dev(&col);
        p.feat_mean[i] = m;
        p.feat_scale[i] = if s > 1e-12 { s } else { 1.0 };
    }
    let mut rng = rng_from_seed(derive_seed_str(cfg.seed, "router"));
    let init = Normal::new(0.0, 1.0 / (f as f64).sqrt()).expect("positive std");
    p.w1.iter_mut().for_each(|w| *w = init.sample(&mut rng));

    let mut theta = p.flat();
    let mut adam = Adam::new(AdamConfig::with_lr(cfg.lr), [theta.len()]);
    for _ in 0..cfg.steps {
        let (_, g) = router_loss_grad(&p, examples, cfg.mode);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite router gradient".into()));
        }
        adam.step([(theta.as_mut_slice(), g.as_slice())]);
        p.set_flat(&theta);
    }
    Ok(p)
}

/// Builds examples from `datasets` and fits a router on them.
pub fn train_router(
    pool: &ModelPool,
    embedder: &dyn Embedder,
    datasets: &[(String, Vec<TimeSeries>)],
    bench: &BenchConfig,
    cfg: &RouterConfig,
) -> Result<RouterParams> {
    pool.require_fusable()?;
    let examples = routing_examples(pool, embedder, datasets, bench)?;
    if examples.is_empty() {
        return Err(Error::EmptyInput("routing windows".into()));
    }
    fit_router(&examples, pool.names(), embedder.name(), cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedForecast {
    pub point: Vec<f64>,
    pub weights: Vec<f64>,
}

/// `Σ_k w_k · f_k` with `w` from the router.
pub fn route_fuse(
    router: &RouterParams,
    embedder: &dyn Embedder,
    history: Window<'_>,
    pool: &ModelPool,
    horizon: usize,
) -> Result<RoutedForecast> {
    if router.members != pool.names() {
        return Err(Error::KeyMismatch(format!(
            "router trained for {:?}, pool is {:?}",
            router.members,
            pool.names()
        )));
    }
    let weights = router.weights(&embedder.embed(history)?)?;
    let forecasts = pool.forecasts(history, horizon)?;
    Ok(RoutedForecast {
        point: combined(&weights, &forecasts),
        weights,
    })
}

/// Weighted combination of precomputed member forecasts.
pub fn combine_weighted(weights: &[f64], forecasts: &[Vec<f64>]) -> Result<Vec<f64>> {
    if weights.len() != forecasts.len() || forecasts.is_empty() {
        return Err(Error::arg("one weight per member forecast required"));
    }
    Ok(combined(weights, forecasts))
}
