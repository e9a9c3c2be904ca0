//! LOESS smoothing and additive seasonal-trend decomposition.
//!
//! The STL variant here is the two-stage inner loop without the robustness
//! pass. Each iteration:
//!
//! 1. detrends the series with the current trend estimate,
//! 2. smooths every cycle-subseries (all points sharing a phase) with LOESS,
//! 3. removes the low-frequency part of that seasonal estimate with a
//!    centered moving average of one period (2×p for even p), extending the
//!    average linearly over the half-period edges,
//! 4. re-estimates the trend by LOESS of the deseasonalized series.
//!
//! The residual is whatever is left, so the three components always add back
//! to the input up to rounding.

use serde::Serialize;

use crate::data::TimeSeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<f64>,
}

impl Decomposition {
    /// `trend + seasonal`, the deterministic part kept by block bootstrap.
    pub fn structural(&self) -> Vec<f64> {
        self.trend
            .iter()
            .zip(&self.seasonal)
            .map(|(t, s)| t + s)
            .collect()
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        self.structural()
            .iter()
            .zip(&self.residual)
            .map(|(a, r)| a + r)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StlConfig {
    pub inner_iters: usize,
    /// LOESS span applied to each cycle-subseries.
    pub seasonal_span: f64,
    /// LOESS span of the trend smoother; `None` means `1.5·period / T`
    /// clamped to `(0, 1]`.
    pub trend_span: Option<f64>,
}

impl Default for StlConfig {
    fn default() -> Self {
        Self {
            inner_iters: 2,
            seasonal_span: 0.6,
            trend_span: None,
        }
    }
}

/// Tricube-weighted local polynomial smoothing of `values` against their index.
///
/// Each point uses its `⌈span·T⌉` nearest neighbours. The bandwidth is the
/// distance to the farthest of them plus one grid step, so every neighbour
/// carries positive weight.
pub fn loess(values: &[f64], span: f64, degree: usize) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 {
        return Err(Error::TooShort { needed: 3, got: n });
    }
    loess_inner(values, span, degree)
}

fn loess_inner(values: &[f64], span: f64, degree: usize) -> Result<Vec<f64>> {
    let n = values.len();
    if !(span > 0.0 && span <= 1.0) {
        return Err(Error::arg(format!("loess span {span} outside (0, 1]")));
    }
    if degree > 1 {
        return Err(Error::arg("loess degree must be 0 or 1"));
    }
    let q = ((span * n as f64).ceil() as usize).min(n);
    if q < degree + 1 {
        return Err(Error::arg(format!(
            "loess window of {q} points is too small for degree {degree}"
        )));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(q / 2).min(n - q);
        let hi = lo + q;
        let h = ((i - lo).max(hi - 1 - i) + 1) as f64;
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (j, &y) in values.iter().enumerate().take(hi).skip(lo) {
            let x = j as f64 - i as f64;
            let u = (x.abs() / h).min(1.0);
            let w = (1.0 - u * u * u).powi(3);
            s0 += w;
            s1 += w * x;
            s2 += w * x * x;
            t0 += w * y;
            t1 += w * x * y;
        }
        let fit = if degree == 0 {
            t0 / s0
        } else {
            (s2 * t0 - s1 * t1) / (s0 * s2 - s1 * s1)
        };
        out.push(fit);
    }
    Ok(out)
}

/// Centered moving average over one period; the `⌊p/2⌋` points at each edge
/// are linear extrapolations of the nearest interior averages.
fn cycle_lowpass(values: &[f64], period: usize) -> Vec<f64> {
    let n = values.len();
    let half = period / 2;
    let weights: Vec<f64> = if period % 2 == 1 {
        vec![1.0 / period as f64; period]
    } else {
        let mut w = vec![1.0 / period as f64; period + 1];
        w[0] *= 0.5;
        w[period] *= 0.5;
        w
    };
    let mut out = vec![0.0; n];
    for (t, slot) in out.iter_mut().enumerate().take(n - half).skip(half) {
        *slot = weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * values[t + k - half])
            .sum();
    }
    let first = half;
    let last = n - half - 1;
    let span = (last - first + 1).min(period);
    let left = line_fit(&out[first..first + span], first);
    let right = line_fit(&out[last + 1 - span..=last], last + 1 - span);
    for (t, slot) in out.iter_mut().enumerate().take(first) {
        *slot = left.0 + left.1 * t as f64;
    }
    for (t, slot) in out.iter_mut().enumerate().skip(last + 1) {
        *slot = right.0 + right.1 * t as f64;
    }
    out
}

/// Least-squares `(intercept, slope)` of `ys` located at indices `offset..`.
fn line_fit(ys: &[f64], offset: usize) -> (f64, f64) {
    let slope = crate::stats::ols_slope(ys);
    let xm = offset as f64 + (ys.len() - 1) as f64 / 2.0;
    let ym = crate::stats::mean(ys);
    (ym - slope * xm, slope)
}

pub fn stl_decompose(
    series: &TimeSeries,
    period: usize,
    inner_iters: usize,
) -> Result<Decomposition> {
    let cfg = StlConfig {
        inner_iters,
        ..StlConfig::default()
    };
    stl_values(series.values(), period, &cfg)
}

pub fn stl_values(values: &[f64], period: usize, cfg: &StlConfig) -> Result<Decomposition> {
    let n = values.len();
    if period < 2 {
        return Err(Error::arg("STL period must be at least 2"));
    }
    if n < 2 * period {
        return Err(Error::TooShort {
            needed: 2 * period,
            got: n,
        });
    }
    if cfg.inner_iters == 0 {
        return Err(Error::arg("STL needs at least one inner iteration"));
    }
    let trend_span = cfg
        .trend_span
        .unwrap_or(1.5 * period as f64 / n as f64)
        .min(1.0);

    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    for _ in 0..cfg.inner_iters {
        let detrended: Vec<f64> = values.iter().zip(&trend).map(|(y, t)| y - t).collect();
        let mut cycle = vec![0.0; n];
        for phase in 0..period {
            let sub: Vec<f64> = detrended
                .iter()
                .skip(phase)
                .step_by(period)
                .copied()
                .collect();
            let smooth = loess_inner(&sub, cfg.seasonal_span, 1)?;
            for (j, v) in smooth.into_iter().enumerate() {
                cycle[phase + j * period] = v;
            }
        }
        let low = cycle_lowpass(&cycle, period);
        for t in 0..n {
            seasonal[t] = cycle[t] - low[t];
        }
        let deseasonal: Vec<f64> = values.iter().zip(&seasonal).map(|(y, s)| y - s).collect();
        trend = loess_inner(&deseasonal, trend_span, 1)?;
    }
    let residual = (0..n).map(|t| values[t] - trend[t] - seasonal[t]).collect();
    Ok(Decomposition {
        trend,
        seasonal,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FreqClass, Frequency};
    use std::f64::consts::TAU;

    fn series(values: Vec<f64>) -> TimeSeries {
        TimeSeries::from_values("x", Frequency::new(FreqClass::Month), values).unwrap()
    }

    #[test]
    fn loess_constant_is_fixed_point() {
        let v = vec![4.25; 17];
        for span in [0.2, 0.5, 1.0] {
            for deg in [0, 1] {
                let out = loess(&v, span, deg).unwrap();
                assert!(out.iter().all(|x| (x - 4.25).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn loess_reproduces_lines_with_degree_one() {
        let v: Vec<f64> = (0..50).map(|t| 2.0 * t as f64 + 1.0).collect();
        let out = loess(&v, 0.3, 1).unwrap();
        for (a, b) in out.iter().zip(&v) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn loess_reduces_variance_of_noisy_sine() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(3);
        let v: Vec<f64> = (0..200)
            .map(|t| (t as f64 * TAU / 50.0).sin() + rng.random_range(-0.5..0.5))
            .collect();
        let out = loess(&v, 0.3, 1).unwrap();
        assert!(crate::stats::std_dev(&out) < crate::stats::std_dev(&v));
    }

    #[test]
    fn loess_rejects_bad_windows() {
        assert!(loess(&[1.0, 2.0], 0.5, 1).is_err());
        // ⌈0.1·5⌉ = 1 point cannot support a line.
        assert!(loess(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.1, 1).is_err());
        assert!(loess(&[1.0, 2.0, 3.0], 0.0, 0).is_err());
        assert!(loess(&[1.0, 2.0, 3.0], 1.5, 0).is_err());
    }

    #[test]
    fn stl_recovers_known_components() {
        let amp = 3.0;
        let v: Vec<f64> = (0..120)
            .map(|t| 0.5 * t as f64 + amp * (TAU * t as f64 / 12.0).cos())
            .collect();
        let d = stl_decompose(&series(v.clone()), 12, 2).unwrap();
        let max_res = d.residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        assert!(max_res <= 0.05 * amp, "max residual {max_res}");
        for t in 0..120 {
            assert!((d.trend[t] - 0.5 * t as f64).abs() < 1e-6);
        }
        // Each full cycle of the seasonal part sums to ~0.
        for c in d.seasonal.chunks(12) {
            assert!(c.iter().sum::<f64>().abs() < 1e-6);
        }
    }

    #[test]
    fn stl_constant_series() {
        let d = stl_decompose(&series(vec![7.5; 30]), 6, 2).unwrap();
        for t in 0..30 {
            assert!((d.trend[t] - 7.5).abs() <= 1e-6);
            assert!(d.seasonal[t].abs() <= 1e-6);
            assert!(d.residual[t].abs() <= 1e-6);
        }
    }

    #[test]
    fn stl_odd_period_and_minimum_length() {
        let v: Vec<f64> = (0..10)
            .map(|t| (t as f64 * 1.7).sin() * 3.0 + t as f64)
            .collect();
        let d = stl_decompose(&series(v.clone()), 5, 2).unwrap();
        for (a, b) in d.reconstruct().iter().zip(&v) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn stl_rejects_short_series() {
        let err = stl_decompose(&series(vec![1.0; 23]), 12, 2).unwrap_err();
        assert!(matches!(
            err,
            Error::TooShort {
                needed: 24,
                got: 23
            }
        ));
        assert!(stl_decompose(&series(vec![1.0; 23]), 1, 2).is_err());
    }
}
