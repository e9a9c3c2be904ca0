#![allow(dead_code)]

use hybridcast_core::baselines::{AutoAr, Naive, SeasonalNaive};
use hybridcast_core::eval::{wmape, BenchConfig};
use hybridcast_core::simulate::{generate, NoiseSpec, SeasonSpec, SyntheticSpec, TrendSpec};
use hybridcast_core::{Forecaster, FreqClass, Result, TimeSeries, Window};
use hybridcast_fusion::{ModelPool, PoolMember};

/// Knows every series it was built from and continues any prefix of them
/// exactly; unknown histories fall back to the naive forecast.
pub struct Oracle {
    pub series: Vec<TimeSeries>,
    pub conf: f64,
}

impl Oracle {
    fn lookup(&self, history: &[f64]) -> Option<&TimeSeries> {
        self.series
            .iter()
            .find(|s| s.len() > history.len() && &s.values()[..history.len()] == history)
    }
}

impl Forecaster for Oracle {
    fn name(&self) -> &str {
        "oracle"
    }
    fn predict(&self, history: Window<'_>, horizon: usize) -> Result<Vec<f64>> {
        match self.lookup(history.values) {
            Some(s) => {
                let n = history.len();
                let mut out: Vec<f64> = s.values()[n..(n + horizon).min(s.len())].to_vec();
                let last = *out.last().unwrap();
                out.resize(horizon, last);
                Ok(out)
            }
            None => Naive.predict(history, horizon),
        }
    }
    fn confidence(&self, history: Window<'_>, _horizon: usize) -> Result<f64> {
        Ok(if self.lookup(history.values).is_some() {
            self.conf
        } else {
            0.0
        })
    }
}

fn monthly(mut spec: SyntheticSpec, id: String) -> SyntheticSpec {
    spec.freq = FreqClass::Month;
    spec.period = Some(12);
    spec.id = id;
    spec
}

/// Upward linear trend with mild noise and no seasonality.
pub fn trendy(len: usize, seed: u64, i: usize) -> TimeSeries {
    let slope = 0.6 + 0.1 * (i % 7) as f64;
    let spec = SyntheticSpec::new(
        len,
        TrendSpec::linear(slope, 40.0 + i as f64),
        None,
        NoiseSpec::gaussian(0.4),
    );
    generate(&monthly(spec, format!("trend{i}")), seed).unwrap()
}

/// Flat level with a strong yearly cycle.
pub fn seasonal(len: usize, seed: u64, i: usize) -> TimeSeries {
    let spec = SyntheticSpec::new(
        len,
        TrendSpec::linear(0.0, 60.0 + i as f64),
        Some(SeasonSpec::cosine(12, 15.0, 0.7 * i as f64)),
        NoiseSpec::gaussian(0.4),
    );
    generate(&monthly(spec, format!("seasonal{i}")), seed).unwrap()
}

/// Equal numbers of trendy and seasonal series.
pub fn regime_mixture(n_each: usize, len: usize, seed: u64) -> Vec<TimeSeries> {
    (0..n_each)
        .flat_map(|i| {
            [
                trendy(len, seed.wrapping_add(2 * i as u64), i),
                seasonal(len, seed.wrapping_add(2 * i as u64 + 1), i),
            ]
        })
        .collect()
}

/// Seasonal naive and a drift model (AR(1) on first differences).
pub fn specialist_pool() -> ModelPool {
    ModelPool::new(vec![
        PoolMember::new(
            Box::new(SeasonalNaive::default()),
            "seasonal_naive",
            "local",
        ),
        PoolMember::new(
            Box::new(AutoAr {
                order: Some(1),
                max_order: 1,
                differenced: true,
            }),
            "ar",
            "local",
        )
        .with_name("drift"),
    ])
    .unwrap()
}

/// `1 − mean WMAPE` of `f` over every rolling window of `series`.
pub fn fa_of<F>(series: &[TimeSeries], bench: &BenchConfig, mut f: F) -> f64
where
    F: FnMut(Window<'_>) -> Vec<f64>,
{
    let mut total = 0.0;
    let mut n = 0;
    for s in series {
        for o in bench.origins(s.len()).unwrap() {
            let pred = f(s.window(0..o));
            total += wmape(&s.values()[o..o + bench.horizon], &pred).unwrap();
            n += 1;
        }
    }
    1.0 - total / n as f64
}
