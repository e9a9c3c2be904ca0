//! Compositional synthetic series: a trend, an optional seasonal pattern and
//! a noise process, combined additively or multiplicatively, optionally
//! spliced onto a second recipe at a transition point.
//!
//! Also provides [`skill_suite`], fixed presets probing seven forecasting
//! capabilities.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{default_start, FreqClass, Frequency, TimeSeries};
use crate::error::{Error, Result};
use crate::rng::{derive_seed_str, rng_from_seed};

/// Largest magnitude an exponential trend may reach over the series.
pub const MAX_TREND_MAGNITUDE: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendKind {
    Linear,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendSpec {
    pub kind: TrendKind,
    /// Slope per step (linear) or growth rate per step (exponential).
    #[serde(alias = "rate")]
    pub slope: f64,
    pub intercept: f64,
}

impl TrendSpec {
    pub fn linear(slope: f64, intercept: f64) -> Self {
        Self {
            kind: TrendKind::Linear,
            slope,
            intercept,
        }
    }

    pub fn exponential(rate: f64, intercept: f64) -> Self {
        Self {
            kind: TrendKind::Exponential,
            slope: rate,
            intercept,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        match self.kind {
            TrendKind::Linear => self.intercept + self.slope * t,
            TrendKind::Exponential => self.intercept * (self.slope * t).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeasonKind {
    Cosine,
    RandomPeriodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeasonSpec {
    pub kind: SeasonKind,
    pub period: usize,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
    /// Explicit one-period pattern for `random_periodic`. When absent, it is
    /// drawn from U(−1, 1), centered, and scaled by `amplitude`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<Vec<f64>>,
}

impl SeasonSpec {
    pub fn cosine(period: usize, amplitude: f64, phase: f64) -> Self {
        Self {
            kind: SeasonKind::Cosine,
            period,
            amplitude,
            phase,
            template: None,
        }
    }

    pub fn random_periodic(period: usize, amplitude: f64) -> Self {
        Self {
            kind: SeasonKind::RandomPeriodic,
            period,
            amplitude,
            phase: 0.0,
            template: None,
        }
    }

    /// The repeating one-period pattern.
    fn pattern(&self, seed: u64) -> Vec<f64> {
        match self.kind {
            SeasonKind::Cosine => (0..self.period)
                .map(|t| self.amplitude * (TAU * t as f64 / self.period as f64 + self.phase).cos())
                .collect(),
            SeasonKind::RandomPeriodic => {
                if let Some(t) = &self.template {
                    return t.clone();
                }
                let mut rng = rng_from_seed(derive_seed_str(seed, "season"));
                let raw: Vec<f64> = (0..self.period)
                    .map(|_| rng.random_range(-1.0..1.0) * self.amplitude)
                    .collect();
                let m = crate::stats::mean(&raw);
                raw.into_iter().map(|v| v - m).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Red,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
    /// AR(1) coefficient φ of red noise.
    #[serde(default)]
    pub ar_coefficient: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::gaussian(0.0)
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            sigma,
            ar_coefficient: 0.0,
        }
    }

    pub fn red(sigma: f64, phi: f64) -> Self {
        Self {
            kind: NoiseKind::Red,
            sigma,
            ar_coefficient: phi,
        }
    }

    /// Gaussian noise is i.i.d. N(0, σ²). Red noise is `x[t] = φ·x[t−1] + ε[t]`
    /// with ε ~ N(0, σ²), started from its stationary distribution.
    pub fn sample(&self, len: usize, seed: u64) -> Vec<f64> {
        if self.sigma == 0.0 {
            return vec![0.0; len];
        }
        let mut rng = rng_from_seed(derive_seed_str(seed, "noise"));
        let eps = Normal::new(0.0, self.sigma).expect("sigma validated");
        match self.kind {
            NoiseKind::Gaussian => (0..len).map(|_| eps.sample(&mut rng)).collect(),
            NoiseKind::Red => {
                let phi = self.ar_coefficient;
                let mut out = Vec::with_capacity(len);
                let mut x = eps.sample(&mut rng) / (1.0 - phi * phi).sqrt();
                for _ in 0..len {
                    out.push(x);
                    x = phi * x + eps.sample(&mut rng);
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    #[default]
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub split_index: usize,
    pub spec: Box<SyntheticSpec>,
    /// Skip the level offset that makes the trend continuous at the splice.
    #[serde(default)]
    pub discontinuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    #[serde(default = "default_id")]
    pub id: String,
    #[serde(default = "default_freq")]
    pub freq: FreqClass,
    /// Seasonal period recorded on the output; defaults to the season's
    /// period, or the frequency default when there is no season.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    pub length: usize,
    pub trend: TrendSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub season: Option<SeasonSpec>,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub composition: Composition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Transition>,
}

fn default_id() -> String {
    "sim".into()
}

fn default_freq() -> FreqClass {
    FreqClass::Day
}

impl SyntheticSpec {
    pub fn new(
        length: usize,
        trend: TrendSpec,
        season: Option<SeasonSpec>,
        noise: NoiseSpec,
    ) -> Self {
        Self {
            id: default_id(),
            freq: default_freq(),
            period: None,
            length,
            trend,
            season,
            noise,
            composition: Composition::Additive,
            transition: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_len(self.length)
    }

    fn validate_len(&self, length: usize) -> Result<()> {
        if length == 0 {
            return Err(Error::arg("length must be at least 1"));
        }
        let t = &self.trend;
        if !(t.slope.is_finite() && t.intercept.is_finite()) {
            return Err(Error::arg("trend parameters must be finite"));
        }
        if t.kind == TrendKind::Exponential {
            let peak = t.intercept.abs() * (t.slope * (length - 1) as f64).max(0.0).exp();
            if peak.is_nan() || peak > MAX_TREND_MAGNITUDE {
                return Err(Error::arg(format!(
                    "exponential trend reaches {peak:e}, above {MAX_TREND_MAGNITUDE:e}"
                )));
            }
        }
        if let Some(s) = &self.season {
            if s.period < 2 {
                return Err(Error::arg("season period must be at least 2"));
            }
            if !(s.amplitude.is_finite() && s.phase.is_finite()) {
                return Err(Error::arg("season parameters must be finite"));
            }
            if let Some(tpl) = &s.template {
                if tpl.len() != s.period || tpl.iter().any(|v| !v.is_finite()) {
                    return Err(Error::arg(
                        "season template must hold `period` finite values",
                    ));
                }
            }
        }
        let n = &self.noise;
        if !(n.sigma >= 0.0 && n.sigma.is_finite()) {
            return Err(Error::arg("noise sigma must be finite and nonnegative"));
        }
        if n.kind == NoiseKind::Red && !(n.ar_coefficient > -1.0 && n.ar_coefficient < 1.0) {
            return Err(Error::arg("red noise coefficient must lie in (−1, 1)"));
        }
        if self.period == Some(0) {
            return Err(Error::arg("period must be at least 1"));
        }
        if let Some(tr) = &self.transition {
            if tr.split_index == 0 || tr.split_index >= length {
                return Err(Error::arg(format!(
                    "transition split {} outside (0, {length})",
                    tr.split_index
                )));
            }
            tr.spec.validate_len(length - tr.split_index)?;
        }
        Ok(())
    }

    fn frequency(&self) -> Result<Frequency> {
        let period = self
            .period
            .or(self.season.as_ref().map(|s| s.period))
            .unwrap_or(self.freq.default_period());
        Frequency::with_period(self.freq, period)
    }

    /// Values of this recipe over `length` steps, ignoring `self.length`.
    fn values(&self, length: usize, seed: u64) -> Vec<f64> {
        let split = self.transition.as_ref().map_or(length, |tr| tr.split_index);
        let noise = self.noise.sample(split, seed);
        let pattern = self.season.as_ref().map(|s| s.pattern(seed));
        let mut out: Vec<f64> = (0..split)
            .map(|t| {
                let trend = self.trend.at(t as f64);
                let season = pattern.as_ref().map_or(0.0, |p| p[t % p.len()]);
                match self.composition {
                    Composition::Additive => trend + season + noise[t],
                    Composition::Multiplicative => {
                        trend * (1.0 + season / trend.abs().max(1.0)) * (1.0 + noise[t])
                    }
                }
            })
            .collect();
        if let Some(tr) = &self.transition {
            let tail = tr
                .spec
                .values(length - split, derive_seed_str(seed, "transition"));
            let offset = if tr.discontinuous {
                0.0
            } else {
                self.trend.at(split as f64) - tr.spec.trend.at(0.0)
            };
            out.extend(tail.into_iter().map(|v| v + offset));
        }
        out
    }
}

/// Generates one series from `spec`; deterministic per `(spec, seed)`.
pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<TimeSeries> {
    spec.validate()?;
    TimeSeries::new(
        spec.id.clone(),
        spec.frequency()?,
        default_start(),
        spec.values(spec.length, seed),
    )
}

/// Zero-inflated exponential values: each point is 0 with probability
/// `p_zero`, otherwise an Exponential(`lambda`) draw.
pub fn intermittent_values(len: usize, p_zero: f64, lambda: f64, seed: u64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p_zero) {
        return Err(Error::arg(format!(
            "zero probability {p_zero} outside [0, 1]"
        )));
    }
    let exp = Exp::new(lambda).map_err(|e| Error::arg(format!("exponential rate: {e}")))?;
    let mut rng = rng_from_seed(seed);
    Ok((0..len)
        .map(|_| {
            let active = rng.random::<f64>() >= p_zero;
            let size = exp.sample(&mut rng);
            if active {
                size
            } else {
                0.0
            }
        })
        .collect())
}

pub const SKILLS: [&str; 7] = [
    "trend",
    "seasonality",
    "state_transition",
    "high_entropy",
    "short_long_horizon",
    "long_term_memory",
    "intermittent",
];

/// Default zero probability and spike rate of the intermittent preset.
pub const INTERMITTENT_P: f64 = 0.3;
pub const INTERMITTENT_LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SkillSet {
    pub skill: &'static str,
    pub series: Vec<TimeSeries>,
}

fn with_id(mut spec: SyntheticSpec, id: String) -> SyntheticSpec {
    spec.id = id;
    spec
}

/// Preset recipes for one skill.
pub fn skill_specs(skill: &str) -> Result<Vec<SyntheticSpec>> {
    let specs = match skill {
        "trend" => vec![
            SyntheticSpec::new(
                240,
                TrendSpec::linear(0.5, 20.0),
                None,
                NoiseSpec::gaussian(0.5),
            ),
            SyntheticSpec::new(
                240,
                TrendSpec::linear(-0.2, 80.0),
                None,
                NoiseSpec::gaussian(0.5),
            ),
            SyntheticSpec::new(
                240,
                TrendSpec::exponential(0.01, 10.0),
                None,
                NoiseSpec::gaussian(0.2),
            ),
        ],
        "seasonality" => vec![
            SyntheticSpec::new(
                240,
                TrendSpec::linear(0.0, 20.0),
                Some(SeasonSpec::cosine(12, 5.0, 0.0)),
                NoiseSpec::none(),
            ),
            SyntheticSpec::new(
                240,
                TrendSpec::linear(0.0, 30.0),
                Some(SeasonSpec::cosine(7, 8.0, 1.0)),
                NoiseSpec::none(),
            ),
            SyntheticSpec::new(
                240,
                TrendSpec::linear(0.0, 15.0),
                Some(SeasonSpec::random_periodic(12, 6.0)),
                NoiseSpec::none(),
            ),
        ],
        "state_transition" => {
            let rise = SyntheticSpec::new(
                140,
                TrendSpec::linear(0.4, 0.0),
                None,
                NoiseSpec::gaussian(0.5),
            );
            let mut down = SyntheticSpec::new(
                240,
                TrendSpec::linear(-0.3, 60.0),
                None,
                NoiseSpec::gaussian(0.5),
            );
            down.transition = Some(Transition {
                split_index: 100,
                spec: Box::new(rise),
                discontinuous: false,
            });
            let shifted = SyntheticSpec::new(
                100,
                TrendSpec::linear(0.0, 50.0),
                Some(SeasonSpec::cosine(12, 4.0, 0.0)),
                NoiseSpec::gaussian(0.5),
            );
            let mut level = SyntheticSpec::new(
                240,
                TrendSpec::linear(0.0, 30.0),
                Some(SeasonSpec::cosine(12, 4.0, 0.0)),
                NoiseSpec::gaussian(0.5),
            );
            level.transition = Some(Transition {
                split_index: 140,
                spec: Box::new(shifted),
                discontinuous: true,
            });
            vec![down, level]
        }
        "high_entropy" => vec![
            SyntheticSpec::new(
                240,
                TrendSpec::linear(0.0, 20.0),
                None,
                NoiseSpec::gaussian(4.0),
            ),
            SyntheticSpec::new(
                240,
                TrendSpec::linear(0.0, 20.0),
                Some(SeasonSpec::cosine(7, 1.0, 0.0)),
                NoiseSpec::red(3.0, 0.7),
            ),
        ],
        "short_long_horizon" => vec![
            SyntheticSpec::new(
                480,
                TrendSpec::linear(0.05, 40.0),
                Some(SeasonSpec::cosine(24, 6.0, 0.0)),
                NoiseSpec::gaussian(0.5),
            ),
            SyntheticSpec::new(
                480,
                TrendSpec::linear(0.1, 40.0),
                Some(SeasonSpec::cosine(12, 4.0, 0.5)),
                NoiseSpec::gaussian(1.0),
            ),
        ],
        "long_term_memory" => {
            let mut a = SyntheticSpec::new(
                672,
                TrendSpec::linear(0.0, 50.0),
                Some(SeasonSpec::cosine(168, 10.0, 0.0)),
                NoiseSpec::gaussian(0.5),
            );
            a.freq = FreqClass::Hour;
            let mut b = SyntheticSpec::new(
                672,
                TrendSpec::linear(0.0, 40.0),
                Some(SeasonSpec::random_periodic(168, 8.0)),
                NoiseSpec::gaussian(0.5),
            );
            b.freq = FreqClass::Hour;
            vec![a, b]
        }
        "intermittent" => Vec::new(),
        other => return Err(Error::arg(format!("unknown skill `{other}`"))),
    };
    Ok(specs
        .into_iter()
        .enumerate()
        .map(|(i, s)| with_id(s, format!("{skill}-{i}")))
        .collect())
}

/// The seven skill presets, in [`SKILLS`] order.
pub fn skill_suite(seed: u64) -> Result<Vec<SkillSet>> {
    SKILLS
        .iter()
        .map(|&skill| {
            let skill_seed = derive_seed_str(seed, skill);
            let series = if skill == "intermittent" {
                (0..2)
                    .map(|i| {
                        let values = intermittent_values(
                            2000,
                            INTERMITTENT_P,
                            INTERMITTENT_LAMBDA,
                            crate::rng::derive_seed(skill_seed, i),
                        )?;
                        TimeSeries::from_values(
                            format!("intermittent-{i}"),
                            Frequency::new(FreqClass::Day),
                            values,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?
            } else {
                skill_specs(skill)?
                    .iter()
                    .enumerate()
                    .map(|(i, s)| generate(s, crate::rng::derive_seed(skill_seed, i as u64)))
                    .collect::<Result<Vec<_>>>()?
            };
            Ok(SkillSet { skill, series })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additive_zero_noise_closed_form() {
        let phase = 0.3;
        let spec = SyntheticSpec::new(
            100,
            TrendSpec::linear(0.5, 1.0),
            Some(SeasonSpec::cosine(12, 2.0, phase)),
            NoiseSpec::none(),
        );
        let s = generate(&spec, 9).unwrap();
        for (t, v) in s.values().iter().enumerate() {
            let t = t as f64;
            let want = 1.0 + 0.5 * t + 2.0 * (TAU * t / 12.0 + phase).cos();
            assert!((v - want).abs() <= 1e-12);
        }
        assert_eq!(s.freq.period(), 12);
    }

    #[test]
    fn multiplicative_without_season_is_trend() {
        let mut spec = SyntheticSpec::new(
            50,
            TrendSpec::exponential(0.02, 3.0),
            None,
            NoiseSpec::none(),
        );
        spec.composition = Composition::Multiplicative;
        let s = generate(&spec, 1).unwrap();
        for (t, v) in s.values().iter().enumerate() {
            assert_eq!(*v, 3.0 * (0.02 * t as f64).exp());
        }
    }

    #[test]
    fn random_periodic_is_exactly_periodic_and_centered() {
        let spec = SyntheticSpec::new(
            60,
            TrendSpec::linear(0.0, 0.0),
            Some(SeasonSpec::random_periodic(6, 3.0)),
            NoiseSpec::none(),
        );
        let s = generate(&spec, 4).unwrap();
        let v = s.values();
        for t in 6..60 {
            assert_eq!(v[t], v[t - 6]);
        }
        assert!(v[..6].iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn continuous_transition_joins_trends() {
        let mut a = SyntheticSpec::new(20, TrendSpec::linear(-1.0, 10.0), None, NoiseSpec::none());
        a.transition = Some(Transition {
            split_index: 10,
            spec: Box::new(SyntheticSpec::new(
                10,
                TrendSpec::linear(2.0, 100.0),
                None,
                NoiseSpec::none(),
            )),
            discontinuous: false,
        });
        let v = generate(&a, 0).unwrap().values().to_vec();
        // Point 10 is where A's trend would have been next.
        assert_eq!(v[9], 1.0);
        assert_eq!(v[10], 0.0);
        assert_eq!(v[11], 2.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = SyntheticSpec::new(
            10,
            TrendSpec::exponential(5.0, 1.0),
            None,
            NoiseSpec::none(),
        );
        assert!(generate(&s, 0).is_err());
        s.trend = TrendSpec::linear(0.0, 0.0);
        s.noise = NoiseSpec::red(1.0, 1.0);
        assert!(generate(&s, 0).is_err());
        s.noise = NoiseSpec::none();
        s.transition = Some(Transition {
            split_index: 10,
            spec: Box::new(s.clone()),
            discontinuous: false,
        });
        assert!(generate(&s, 0).is_err());
    }

    #[test]
    fn spec_json_round_trip_and_strictness() {
        let json = r#"{"length":5,"trend":{"kind":"exponential","rate":0.1,"intercept":2},
            "noise":{"kind":"red","sigma":1,"ar_coefficient":0.5}}"#;
        let spec: SyntheticSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.trend.kind, TrendKind::Exponential);
        let again: SyntheticSpec =
            serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
        let bad = r#"{"length":5,"trend":{"kind":"linear","slope":0,"intercept":0},"noise":{"kind":"gaussian","sigma":0},"colour":1}"#;
        assert!(serde_json::from_str::<SyntheticSpec>(bad).is_err());
    }
}
