//! Classical forecasters and the [`Forecaster`] capability shared by every
//! model in the toolkit.
//!
//! The local models ([`Naive`], [`SeasonalNaive`], [`Ses`], [`AutoAr`]) fit
//! on whatever history they are handed. [`LinearArModel`] is a fitted AR(p)
//! with fixed coefficients; it also serves as the trainable small model of
//! the fusion cascade.

use serde::{Deserialize, Serialize};

use crate::data::Window;
use crate::error::{Error, Result};
use crate::linalg::{lstsq, Design};
use crate::stats::{robust_scale, StudentT};

/// Anything that turns a history window into a point forecast.
pub trait Forecaster: Send + Sync {
    fn name(&self) -> &str;

    /// Exactly `horizon` finite values following `history`.
    fn predict(&self, history: Window<'_>, horizon: usize) -> Result<Vec<f64>>;

    /// Self-assessed reliability in `[0, 1]`.
    fn confidence(&self, _history: Window<'_>, _horizon: usize) -> Result<f64> {
        Err(Error::NoConfidence(self.name().to_string()))
    }

    /// Per-step predictive distributions, for probabilistic models.
    fn predict_distribution(
        &self,
        _history: Window<'_>,
        _horizon: usize,
    ) -> Result<Option<Vec<StudentT>>> {
        Ok(None)
    }
}

impl<F: Forecaster + ?Sized> Forecaster for Box<F> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn predict(&self, history: Window<'_>, horizon: usize) -> Result<Vec<f64>> {
        (**self).predict(history, horizon)
    }
    fn confidence(&self, history: Window<'_>, horizon: usize) -> Result<f64> {
        (**self).confidence(history, horizon)
    }
    fn predict_distribution(
        &self,
        history: Window<'_>,
        horizon: usize,
    ) -> Result<Option<Vec<StudentT>>> {
        (**self).predict_distribution(history, horizon)
    }
}

fn non_empty(history: &[f64]) -> Result<()> {
    if history.is_empty() {
        Err(Error::TooShort { needed: 1, got: 0 })
    } else {
        Ok(())
    }
}

pub fn naive_forecast(history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    non_empty(history)?;
    Ok(vec![history[history.len() - 1]; horizon])
}

/// Repeats the last full cycle of `period` values.
pub fn seasonal_naive(history: &[f64], period: usize, horizon: usize) -> Result<Vec<f64>> {
    if period == 0 {
        return Err(Error::arg("period must be at least 1"));
    }
    if history.len() < period {
        return Err(Error::TooShort {
            needed: period,
            got: history.len(),
        });
    }
    let cycle = &history[history.len() - period..];
    Ok((0..horizon).map(|h| cycle[h % period]).collect())
}

/// Final level of simple exponential smoothing, repeated.
pub fn ses_forecast(history: &[f64], alpha: f64, horizon: usize) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::arg(format!("SES alpha {alpha} outside (0, 1]")));
    }
    non_empty(history)?;
    let level = history[1..]
        .iter()
        .fold(history[0], |l, y| alpha * y + (1.0 - alpha) * l);
    Ok(vec![level; horizon])
}

/// `y_t = c + Σ a_i·y_{t−i} + e_t`, optionally on first differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearArModel {
    pub order: usize,
    pub intercept: f64,
    /// `coef[i]` multiplies `y_{t−1−i}`.
    pub coef: Vec<f64>,
    /// RMS of in-sample one-step errors.
    pub residual_std: f64,
    #[serde(default)]
    pub differenced: bool,
    /// Set when the least-squares fit needed the ridge fallback.
    #[serde(default)]
    pub ridged: bool,
}

fn diff(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Least-squares AR(p) fit with intercept. Needs `2p + 1` points.
pub fn ar_fit(history: &[f64], p: usize) -> Result<LinearArModel> {
    if p == 0 {
        return Err(Error::arg("AR order must be at least 1"));
    }
    if history.len() < 2 * p + 1 {
        return Err(Error::TooShort {
            needed: 2 * p + 1,
            got: history.len(),
        });
    }
    let mut x = Design::new(p + 1);
    let mut y = Vec::with_capacity(history.len() - p);
    let mut row = vec![1.0; p + 1];
    for t in p..history.len() {
        for i in 0..p {
            row[i + 1] = history[t - 1 - i];
        }
        x.push_row(&row);
        y.push(history[t]);
    }
    let sol = lstsq(&x, &y)?;
    let fitted = x.mul_vec(&sol.coef);
    let sse: f64 = fitted.iter().zip(&y).map(|(f, t)| (t - f).powi(2)).sum();
    Ok(LinearArModel {
        order: p,
        intercept: sol.coef[0],
        coef: sol.coef[1..].to_vec(),
        residual_std: (sse / y.len() as f64).sqrt(),
        differenced: false,
        ridged: sol.ridged,
    })
}

/// AR(p) on first differences; forecasts are integrated back to levels.
pub fn ar_fit_differenced(history: &[f64], p: usize) -> Result<LinearArModel> {
    if history.len() < 2 * p + 2 {
        return Err(Error::TooShort {
            needed: 2 * p + 2,
            got: history.len(),
        });
    }
    let mut m = ar_fit(&diff(history), p)?;
    m.differenced = true;
    Ok(m)
}

impl LinearArModel {
    /// Points of history a forecast needs.
    pub fn min_history(&self) -> usize {
        self.order + usize::from(self.differenced)
    }

    fn step(&self, lags: &[f64]) -> f64 {
        // `lags` ends with the most recent value.
        let n = lags.len();
        self.intercept
            + (0..self.order)
                .map(|i| self.coef[i] * lags[n - 1 - i])
                .sum::<f64>()
    }

    /// Recursive multi-step forecast that feeds predictions back as lags.
    pub fn forecast(&self, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
        if history.len() < self.min_history() {
            return Err(Error::TooShort {
                needed: self.min_history(),
                got: history.len(),
            });
        }
        let base = if self.differenced {
            diff(history)
        } else {
            history.to_vec()
        };
        let mut buf = base[base.len() - self.order..].to_vec();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let next = self.step(&buf);
            buf.remove(0);
            buf.push(next);
            out.push(next);
        }
        if self.differenced {
            let mut level = history[history.len() - 1];
            for v in &mut out {
                level += *v;
                *v = level;
            }
        }
        Ok(out)
    }

    /// One-step-ahead errors `y_t − ŷ_t` over every `t` with a full lag set.
    pub fn one_step_errors(&self, history: &[f64]) -> Vec<f64> {
        let start = self.min_history();
        (start..history.len())
            .map(|t| {
                let pred = if self.differenced {
                    let d = diff(&history[t - start..t]);
                    history[t - 1] + self.step(&d)
                } else {
                    self.step(&history[t - start..t])
                };
                history[t] - pred
            })
            .collect()
    }

    /// RMS one-step error on `history`, or the stored in-sample value when
    /// `history` is too short to provide at least two errors.
    pub fn error_scale(&self, history: &[f64]) -> f64 {
        let e = self.one_step_errors(history);
        if e.len() < 2 {
            return self.residual_std;
        }
        (e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64).sqrt()
    }
}

pub fn ar_predict(model: &LinearArModel, history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    model.forecast(history, horizon)
}

/// `1 / (1 + error_scale / (robust_scale(history) + 1e-8))`.
pub fn confidence_score(error_scale: f64, history: &[f64]) -> f64 {
    1.0 / (1.0 + error_scale / (robust_scale(history) + 1e-8))
}

/// Confidence of a fitted AR model on `history`; see
/// [`LinearArModel::error_scale`] for the error term.
pub fn baseline_confidence(model: &LinearArModel, history: &[f64]) -> f64 {
    confidence_score(model.error_scale(history), history)
}

#[derive(Debug, Clone, Default)]
pub struct Naive;

impl Forecaster for Naive {
    fn name(&self) -> &str {
        "naive"
    }
    fn predict(&self, history: Window<'_>, horizon: usize) -> Result<Vec<f64>> {
        naive_forecast(history.values, horizon)
    }
    fn confidence(&self, history: Window<'_>, _horizon: usize) -> Result<f64> {
        non_empty(history.values)?;
        let e = diff(history.values);
        let rs = if e.is_empty() {
            0.0
        } else {
            (e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64).sqrt()
        };
        Ok(confidence_score(rs, history.values))
    }
}

/// Seasonal naive; the period defaults to the history's seasonal period.
#[derive(Debug, Clone, Default)]
pub struct SeasonalNaive {
    pub period: Option<usize>,
}

impl Forecaster for SeasonalNaive {
    fn name(&self) -> &str {
        "seasonal_naive"
    }
    fn predict(&self, history: Window<'_>, horizon: usize) -> Result<Vec<f64>> {
        let period = self.period.unwrap_or(history.freq.steps_per_cycle);
        seasonal_naive(history.values, period, horizon)
    }
}

#[derive(Debug, Clone)]
pub struct Ses {
    pub alpha: f64,
}

impl Default for Ses {
    fn default() -> Self {
        Self { alpha: 0.3 }
    }
}

impl Forecaster for Ses {
    fn name(&self) -> &str {
        "ses"
    }
    fn predict(&self, history: Window<'_>, horizon: usize) -> Result<Vec<f64>> {
        ses_forecast(history.values, self.alpha, horizon)
    }
}

/// AR(p) refitted on every history it sees. The order defaults to the
/// seasonal period, capped by `max_order` and by what the history supports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutoAr {
    #[serde(default)]
    pub order: Option<usize>,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    #[serde(default)]
    pub differenced: bool,
}

fn default_max_order() -> usize {
    24
}

impl Default for AutoAr {
    fn default() -> Self {
        Self {
            order: None,
            max_order: default_max_order(),
            differenced: false,
        }
    }
}

impl AutoAr {
    pub fn order_for(&self, history: Window<'_>) -> usize {
        let wanted = self
            .order
            .unwrap_or(history.freq.steps_per_cycle)
            .min(self.max_order);
        let extra = usize::from(self.differenced);
        let supported = history.len().saturating_sub(1 + extra) / 2;
        wanted.min(supported).max(1)
    }

    pub fn fit(&self, history: Window<'_>) -> Result<LinearArModel> {
        let p = self.order_for(history);
        if self.differenced {
            ar_fit_differenced(history.values, p)
        } else {
            ar_fit(history.values, p)
        }
    }
}

impl Forecaster for AutoAr {
    fn name(&self) -> &str {
        "ar"
    }
    fn predict(&self, history: Window<'_>, horizon: usize) -> Result<Vec<f64>> {
        self.fit(history)?.forecast(history.values, horizon)
    }
    fn confidence(&self, history: Window<'_>, _horizon: usize) -> Result<f64> {
        let m = self.fit(history)?;
        Ok(confidence_score(m.residual_std, history.values))
    }
}

impl Forecaster for LinearArModel {
    fn name(&self) -> &str {
        "linear_ar"
    }
    fn predict(&self, history: Window<'_>, horizon: usize) -> Result<Vec<f64>> {
        self.forecast(history.values, horizon)
    }
    fn confidence(&self, history: Window<'_>, _horizon: usize) -> Result<f64> {
        Ok(baseline_confidence(self, history.values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FreqClass, Frequency, TimeSeries};

    #[test]
    fn naive_family() {
        assert_eq!(naive_forecast(&[1.0, 2.0, 3.0], 2).unwrap(), vec![3.0, 3.0]);
        assert_eq!(
            seasonal_naive(&[1.0, 2.0, 1.0, 2.0], 2, 3).unwrap(),
            vec![1.0, 2.0, 1.0]
        );
        assert!(naive_forecast(&[1.0], 0).unwrap().is_empty());
        assert!(seasonal_naive(&[1.0], 2, 1).is_err());
        assert!(naive_forecast(&[], 1).is_err());
    }

    #[test]
    fn ses_cases() {
        assert_eq!(ses_forecast(&[4.0; 5], 0.3, 2).unwrap(), vec![4.0, 4.0]);
        assert_eq!(
            ses_forecast(&[1.0, 7.0, 2.0], 1.0, 2).unwrap(),
            vec![2.0, 2.0]
        );
        assert_eq!(ses_forecast(&[0.0, 10.0], 0.5, 3).unwrap(), vec![5.0; 3]);
        assert!(ses_forecast(&[1.0], 0.0, 1).is_err());
        assert!(ses_forecast(&[1.0], 1.5, 1).is_err());
    }

    #[test]
    fn ar_recovers_noiseless_ar1() {
        let mut y = vec![5.0];
        for _ in 0..60 {
            y.push(0.8 * y[y.len() - 1]);
        }
        let m = ar_fit(&y, 1).unwrap();
        assert!((m.coef[0] - 0.8).abs() <= 1e-6);
        assert!(m.intercept.abs() <= 1e-6);
    }

    #[test]
    fn ar2_continues_a_line() {
        let y: Vec<f64> = (0..30).map(|t| 2.0 * t as f64).collect();
        let m = ar_fit(&y, 2).unwrap();
        let f = ar_predict(&m, &y, 2).unwrap();
        assert!((f[0] - 60.0).abs() <= 1e-6);
        assert!((f[1] - 62.0).abs() <= 1e-6);
    }

    #[test]
    fn ar_constant_series_predicts_constant() {
        let m = ar_fit(&[3.0; 20], 2).unwrap();
        assert!(m.ridged);
        for v in ar_predict(&m, &[3.0; 20], 5).unwrap() {
            assert!((v - 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn differenced_ar_on_line() {
        let y: Vec<f64> = (0..20).map(|t| 1.0 + 0.5 * t as f64).collect();
        let m = ar_fit_differenced(&y, 1).unwrap();
        let f = m.forecast(&y, 3).unwrap();
        for (h, v) in f.iter().enumerate() {
            assert!((v - (1.0 + 0.5 * (20 + h) as f64)).abs() < 1e-6);
        }
        assert!(m.one_step_errors(&y).iter().all(|e| e.abs() < 1e-6));
    }

    #[test]
    fn confidence_formula() {
        let h = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(confidence_score(0.0, &h), 1.0);
        let scale = robust_scale(&h);
        assert!((confidence_score(scale + 1e-8, &h) - 0.5).abs() < 1e-12);
        assert!(confidence_score(2.0, &h) < confidence_score(1.0, &h));
    }

    #[test]
    fn local_models_respect_horizon() {
        let s = TimeSeries::from_values(
            "x",
            Frequency::new(FreqClass::Month),
            (0..48).map(|t| (t as f64 * 0.5).sin() + 10.0).collect(),
        )
        .unwrap();
        let models: Vec<Box<dyn Forecaster>> = vec![
            Box::new(Naive),
            Box::new(SeasonalNaive::default()),
            Box::new(Ses::default()),
            Box::new(AutoAr::default()),
        ];
        for m in &models {
            let f = m.predict(s.as_window(), 7).unwrap();
            assert_eq!(f.len(), 7, "{}", m.name());
            assert!(f.iter().all(|v| v.is_finite()));
        }
        assert!(SeasonalNaive::default()
            .confidence(s.as_window(), 1)
            .is_err());
    }
}
