mod common;

use common::Oracle;
use hybridcast_core::baselines::{ar_fit, baseline_confidence, LinearArModel};
use hybridcast_core::eval::{wmape, BenchConfig};
use hybridcast_core::simulate::NoiseSpec;
use hybridcast_core::{FreqClass, Frequency, TimeSeries};
use hybridcast_fusion::coordinate::ar_forecast_with_sensitivity;
use hybridcast_fusion::{coordinate_infer, coordinate_train, CoordinationConfig, Route};
use proptest::prelude::*;

const H: usize = 8;

fn wave(id: &str, period: f64, phase: f64, len: usize, seed: u64) -> TimeSeries {
    let noise = NoiseSpec::gaussian(0.05).sample(len, seed);
    let v: Vec<f64> = (0..len)
        .map(|t| 10.0 + 3.0 * (std::f64::consts::TAU * t as f64 / period + phase).sin() + noise[t])
        .collect();
    TimeSeries::from_values(id, Frequency::new(FreqClass::Day), v).unwrap()
}

/// Period-12 series are easy for an AR fitted on that cycle; period-5 series
/// are not.
fn mixed(seed: u64) -> Vec<TimeSeries> {
    (0..4)
        .flat_map(|i| {
            let p = 0.6 * i as f64;
            [
                wave(&format!("easy{i}"), 12.0, p, 80, seed + 2 * i),
                wave(&format!("hard{i}"), 5.0, p, 80, seed + 2 * i + 1),
            ]
        })
        .collect()
}

fn s1() -> LinearArModel {
    ar_fit(wave("fit", 12.0, 0.0, 200, 999).values(), 4).unwrap()
}

fn bench() -> BenchConfig {
    BenchConfig {
        horizon: H,
        n_origins: 5,
        stride: 2,
        min_context: 40,
    }
}

fn cfg(tau: f64, lambda: f64) -> CoordinationConfig {
    CoordinationConfig {
        tau1: tau,
        lambda,
        steps: 400,
        lr: 0.01,
        ..CoordinationConfig::default()
    }
}

fn windows(data: &[TimeSeries]) -> Vec<(TimeSeries, usize)> {
    data.iter()
        .flat_map(|s| {
            bench()
                .origins(s.len())
                .unwrap()
                .into_iter()
                .map(move |o| (s.clone(), o))
        })
        .collect()
}

#[test]
fn construction_splits_into_easy_and_challenging() {
    let s1 = s1();
    for (s, o) in windows(&mixed(1)) {
        let c = baseline_confidence(&s1, &s.values()[..o]);
        if s.id.starts_with("easy") {
            assert!(c > 0.8, "{} at {o}: {c}", s.id);
        } else {
            assert!(c <= 0.8, "{} at {o}: {c}", s.id);
        }
    }
}

#[test]
fn distillation_reduces_error_on_challenging_samples() {
    let data = mixed(1);
    let s1 = s1();
    let large = Oracle {
        series: data.clone(),
        conf: 0.95,
    };
    let out = coordinate_train(&s1, &large, &data, &bench(), &cfg(0.8, 1.0), 0).unwrap();
    assert_eq!(out.challenging, 20);
    assert_eq!(out.easy, 20);
    assert!(out.notice.is_none());
    assert!(out.losses.last().unwrap() < &out.losses[0]);
    let err = |m: &LinearArModel| {
        let mut total = 0.0;
        for (s, o) in windows(&data)
            .into_iter()
            .filter(|(s, _)| s.id.starts_with("hard"))
        {
            total += wmape(
                &s.values()[o..o + H],
                &m.forecast(&s.values()[..o], H).unwrap(),
            )
            .unwrap();
        }
        total
    };
    let (e1, e2) = (err(&s1), err(&out.s2));
    assert!(e2 < e1, "s2 {e2} vs s1 {e1}");
}

#[test]
fn zero_lambda_keeps_s1() {
    let data = mixed(1);
    let s1 = s1();
    let large = Oracle {
        series: data.clone(),
        conf: 0.95,
    };
    let out = coordinate_train(&s1, &large, &data, &bench(), &cfg(0.8, 0.0), 0).unwrap();
    assert!(out.challenging > 0);
    assert!((out.s2.intercept - s1.intercept).abs() <= 1e-8);
    for (a, b) in out.s2.coef.iter().zip(&s1.coef) {
        assert!((a - b).abs() <= 1e-8);
    }
}

#[test]
fn all_easy_returns_copy_with_notice() {
    let data = mixed(1);
    let s1 = s1();
    let large = Oracle {
        series: data.clone(),
        conf: 0.95,
    };
    let out = coordinate_train(&s1, &large, &data, &bench(), &cfg(0.0, 1.0), 0).unwrap();
    assert_eq!(out.s2, s1);
    assert_eq!(out.easy, 40);
    assert!(out.notice.is_some());
}

#[test]
fn unconfident_large_model_gives_no_challenging_samples() {
    let data = mixed(1);
    let s1 = s1();
    let large = Oracle {
        series: data.clone(),
        conf: 0.5,
    };
    let out = coordinate_train(&s1, &large, &data, &bench(), &cfg(0.8, 1.0), 0).unwrap();
    assert_eq!((out.challenging, out.hard), (0, 20));
    assert_eq!(out.s2, s1);
}

#[test]
fn minibatch_training_is_deterministic_per_seed() {
    let data = mixed(1);
    let large = Oracle {
        series: data.clone(),
        conf: 0.95,
    };
    let c = CoordinationConfig {
        batch_size: Some(6),
        steps: 50,
        ..cfg(0.8, 1.0)
    };
    let run = |seed| coordinate_train(&s1(), &large, &data, &bench(), &c, seed).unwrap();
    assert_eq!(run(5), run(5));
    assert_ne!(run(5).s2, run(6).s2);
}

#[test]
fn threshold_extremes_at_inference() {
    let data = mixed(1);
    let s1 = s1();
    let large = Oracle {
        series: data.clone(),
        conf: 0.95,
    };
    for (s, o) in windows(&data) {
        let w = s.window(0..o);
        assert_eq!(
            coordinate_infer(&s1, &s1, &large, w, H, &cfg(0.0, 1.0))
                .unwrap()
                .route,
            Route::S1
        );
        let r = coordinate_infer(&s1, &s1, &large, w, H, &cfg(1.0, 1.0)).unwrap();
        assert_eq!(r.route, Route::Large);
        assert_eq!(r.point, s.values()[o..o + H]);
    }
}

#[test]
fn cascade_is_at_least_as_accurate_as_s1() {
    let data = mixed(1);
    let s1 = s1();
    let large = Oracle {
        series: data.clone(),
        conf: 0.95,
    };
    let c = cfg(0.8, 1.0);
    let s2 = coordinate_train(&s1, &large, &data, &bench(), &c, 0)
        .unwrap()
        .s2;
    let held = mixed(77);
    let large = Oracle {
        series: held.clone(),
        conf: 0.95,
    };
    let (mut cascade, mut solo) = (0.0, 0.0);
    let mut routes = [0usize; 3];
    for (s, o) in windows(&held) {
        let truth = &s.values()[o..o + H];
        let r = coordinate_infer(&s1, &s2, &large, s.window(0..o), H, &c).unwrap();
        routes[r.route as usize] += 1;
        cascade += wmape(truth, &r.point).unwrap();
        solo += wmape(truth, &s1.forecast(&s.values()[..o], H).unwrap()).unwrap();
    }
    assert!(routes[0] > 0 && routes[1] + routes[2] > 0, "{routes:?}");
    assert!(cascade <= solo, "cascade {cascade} vs s1 {solo}");
}

#[test]
fn config_validation() {
    assert!(cfg(1.2, 1.0).validate().is_err());
    assert!(cfg(0.5, -1.0).validate().is_err());
    let c = CoordinationConfig {
        tau2: Some(-0.1),
        ..cfg(0.5, 1.0)
    };
    assert!(c.validate().is_err());
    assert_eq!(cfg(0.3, 1.0).tau2(), 0.3);
    let parsed: CoordinationConfig = serde_json::from_str(r#"{"tau1": 0.6}"#).unwrap();
    assert_eq!(parsed, CoordinationConfig::default());
    assert!(serde_json::from_str::<CoordinationConfig>(r#"{"tau1": 0.6, "tau3": 1}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn routing_follows_the_confidence_rule(seed in 0u64..200, tau in 0.0f64..1.0, cut in 40usize..72) {
        let data = mixed(seed);
        let s1 = s1();
        let mut s2 = s1.clone();
        s2.coef[0] += 0.05 * ((seed % 7) as f64 - 3.0);
        let large = Oracle { series: data.clone(), conf: 0.9 };
        let s = &data[(seed % 8) as usize];
        let h = &s.values()[..cut];
        let r = coordinate_infer(&s1, &s2, &large, s.window(0..cut), H, &cfg(tau, 1.0)).unwrap();
        let (c1, c2) = (baseline_confidence(&s1, h), baseline_confidence(&s2, h));
        let expected = if c1 > tau { Route::S1 } else if c2 > tau { Route::S2 } else { Route::Large };
        prop_assert_eq!(r.route, expected);
        let expected_point = match expected {
            Route::S1 => s1.forecast(h, H).unwrap(),
            Route::S2 => s2.forecast(h, H).unwrap(),
            Route::Large => s.values()[cut..cut + H].to_vec(),
        };
        prop_assert_eq!(r.point, expected_point);
    }

    #[test]
    fn sensitivity_forecast_matches_recursive_forecast(seed in 0u64..200, p in 1usize..5, diffed: bool) {
        let s = wave("x", 9.0, 0.1 * seed as f64, 60, seed);
        let mut m = ar_fit(s.values(), p).unwrap();
        m.differenced = diffed;
        let (f, d) = ar_forecast_with_sensitivity(&m, s.values(), 6).unwrap();
        prop_assert_eq!(f, m.forecast(s.values(), 6).unwrap());
        prop_assert!(d.iter().all(|row| row.len() == p + 1));
    }
}
