use hybridcast_core::simulate::*;
use hybridcast_core::stats::{mean, ols_slope};

#[test]
fn transition_flips_fitted_slope() {
    let mut spec = SyntheticSpec::new(
        200,
        TrendSpec::linear(-0.5, 80.0),
        None,
        NoiseSpec::gaussian(1.0),
    );
    spec.transition = Some(Transition {
        split_index: 100,
        spec: Box::new(SyntheticSpec::new(
            100,
            TrendSpec::linear(0.5, 0.0),
            None,
            NoiseSpec::gaussian(1.0),
        )),
        discontinuous: false,
    });
    let s = generate(&spec, 3).unwrap();
    assert!(ols_slope(&s.values()[..100]) < 0.0);
    assert!(ols_slope(&s.values()[100..]) > 0.0);
}

#[test]
fn red_noise_with_zero_coefficient_matches_gaussian_variance() {
    let n = 100_000;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
    };
    let red = NoiseSpec::red(2.0, 0.0).sample(n, 1);
    let white = NoiseSpec::gaussian(2.0).sample(n, 2);
    let (vr, vw) = (var(&red), var(&white));
    assert!((vr / vw - 1.0).abs() <= 0.05, "{vr} vs {vw}");
    assert!((vr / 4.0 - 1.0).abs() <= 0.05);
}

#[test]
fn red_noise_is_stationary_ar1() {
    let phi = 0.8;
    let x = NoiseSpec::red(1.0, phi).sample(200_000, 7);
    let m = mean(&x);
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64;
    // Stationary variance σ²/(1 − φ²).
    assert!(
        (var / (1.0 / (1.0 - phi * phi)) - 1.0).abs() < 0.05,
        "{var}"
    );
    let lag1 = hybridcast_core::stats::autocorr(&x, 1);
    assert!((lag1 - phi).abs() < 0.01);
}

#[test]
fn skill_suite_shape_and_determinism() {
    let a = skill_suite(17).unwrap();
    let b = skill_suite(17).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, skill_suite(18).unwrap());
    let names: Vec<&str> = a.iter().map(|s| s.skill).collect();
    assert_eq!(names, SKILLS);
    for spec in skill_specs("trend").unwrap() {
        assert!(spec.season.is_none());
    }
    let memory = skill_specs("long_term_memory").unwrap();
    assert!(memory
        .iter()
        .all(|s| s.season.as_ref().unwrap().period >= 168));
}

#[test]
fn intermittent_zero_fraction() {
    let suite = skill_suite(5).unwrap();
    let set = suite.iter().find(|s| s.skill == "intermittent").unwrap();
    for s in &set.series {
        assert_eq!(s.len(), 2000);
        let zeros = s.values().iter().filter(|v| **v == 0.0).count() as f64 / 2000.0;
        assert!((zeros - INTERMITTENT_P).abs() <= 0.05, "{zeros}");
        assert!(s.values().iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn generation_is_deterministic() {
    let mut spec = SyntheticSpec::new(
        64,
        TrendSpec::exponential(0.01, 5.0),
        Some(SeasonSpec::random_periodic(8, 2.0)),
        NoiseSpec::red(0.3, 0.5),
    );
    spec.composition = Composition::Multiplicative;
    assert_eq!(generate(&spec, 1).unwrap(), generate(&spec, 1).unwrap());
    assert_ne!(generate(&spec, 1).unwrap(), generate(&spec, 2).unwrap());
}
