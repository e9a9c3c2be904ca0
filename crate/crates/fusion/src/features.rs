//! Series embeddings used as router inputs.

use std::f64::consts::TAU;

use hybridcast_core::decomp::{stl_values, StlConfig};
use hybridcast_core::stats::{autocorr, mean, ols_slope, std_dev};
use hybridcast_core::{Result, Window};

/// Maps a history window to a fixed-length feature vector.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, history: Window<'_>) -> Result<Vec<f64>>;
}

const SPECTRUM_MAX: usize = 256;

/// Hand-crafted features: mean, std, lag-1 autocorrelation, fitted slope,
/// seasonal strength and spectral entropy.
///
/// With `scale_free` the level and spread are replaced by
/// `mean/(|mean| + std)` and the slope by `slope·T/std`, so every feature
/// is unchanged by positive rescaling of the series.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StatEmbedder {
    pub scale_free: bool,
}

impl StatEmbedder {
    pub fn scale_free() -> Self {
        Self { scale_free: true }
    }
}

/// `1 − var(residual)/var(seasonal + residual)` from STL at the window's
/// period, clamped to `[0, 1]`; 0 when the window is shorter than two
/// periods.
pub fn seasonal_strength(values: &[f64], period: usize) -> f64 {
    let Ok(d) = stl_values(values, period, &StlConfig::default()) else {
        return 0.0;
    };
    let detrended: Vec<f64> = d
        .seasonal
        .iter()
        .zip(&d.residual)
        .map(|(s, r)| s + r)
        .collect();
    let total = std_dev(&detrended).powi(2);
    if total <= 0.0 {
        return 0.0;
    }
    (1.0 - std_dev(&d.residual).powi(2) / total).clamp(0.0, 1.0)
}

/// Normalized Shannon entropy of the periodogram of the last 256 points:
/// 0 for a pure tone, 1 for a flat spectrum, 0 for a constant.
pub fn spectral_entropy(values: &[f64]) -> f64 {
    let x = &values[values.len().saturating_sub(SPECTRUM_MAX)..];
    let n = x.len();
    if n < 4 {
        return 0.0;
    }
    let m = mean(x);
    let bins = n / 2;
    let power: Vec<f64> = (1..=bins)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = TAU * (k * t) as f64 / n as f64;
                re += (v - m) * a.cos();
                im -= (v - m) * a.sin();
            }
            re * re + im * im
        })
        .collect();
    let total: f64 = power.iter().sum();
    if total <= 0.0 || bins < 2 {
        return 0.0;
    }
    let h: f64 = power
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| {
            let q = p / total;
            -q * q.ln()
        })
        .sum();
    h / (bins as f64).ln()
}

impl Embedder for StatEmbedder {
    fn name(&self) -> &str {
        if self.scale_free {
            "stat_features_scale_free"
        } else {
            "stat_features"
        }
    }

    fn dim(&self) -> usize {
        if self.scale_free {
            5
        } else {
            6
        }
    }

    fn embed(&self, history: Window<'_>) -> Result<Vec<f64>> {
        let v = history.values;
        if v.is_empty() {
            return Err(hybridcast_core::Error::EmptyInput("history".into()));
        }
        let (m, s) = (mean(v), std_dev(v));
        let acf = autocorr(v, 1);
        let slope = ols_slope(v);
        let seas = seasonal_strength(v, history.freq.period());
        let ent = spectral_entropy(v);
        Ok(if self.scale_free {
            let spread = m.abs() + s;
            let level = if spread > 0.0 { m / spread } else { 0.0 };
            let trend = if s > 0.0 {
                slope * v.len() as f64 / s
            } else {
                0.0
            };
            vec![level, acf, trend, seas, ent]
        } else {
            vec![m, s, acf, slope, seas, ent]
        })
    }
}
