use hybridcast_core::eval::{rolling_benchmark, BenchConfig};
use hybridcast_core::optim::AdamConfig;
use hybridcast_core::{Forecaster, FreqClass, Frequency, TimeSeries};
use hybridcast_tsfm::{embed_series, forecast, ModelConfig, Params, TsfmError, TsfmForecaster};

fn config() -> ModelConfig {
    ModelConfig {
        n_layers: 1,
        d_model: 16,
        n_heads: 2,
        n_experts: 2,
        top_k_experts: 1,
        patch_lengths: vec![8, 16],
        context_patches: 4,
        d_ff: 32,
        optimizer: AdamConfig::with_lr(1e-3),
        seed: 7,
        ..Default::default()
    }
}

fn wave(len: usize, class: FreqClass) -> TimeSeries {
    let v = (0..len)
        .map(|t| 10.0 + (t as f64 * 0.4).sin() * 3.0 + t as f64 * 0.05)
        .collect();
    TimeSeries::from_values("w", Frequency::new(class), v).unwrap()
}

#[test]
fn recursion_count_and_horizon() {
    let params = Params::init(&config()).unwrap();
    let s = wave(50, FreqClass::Day);
    let out = forecast(&params, s.as_window(), 20).unwrap();
    assert_eq!(
        (out.patch_len, out.passes, out.point.len(), out.dists.len()),
        (8, 3, 20, 20)
    );
    for h in 1..=8 {
        let out = forecast(&params, s.as_window(), h).unwrap();
        assert_eq!((out.passes, out.point.len()), (1, h));
    }
    let hourly = forecast(&params, wave(50, FreqClass::Hour).as_window(), 20).unwrap();
    assert_eq!((hourly.patch_len, hourly.passes), (16, 2));
    assert!(forecast(&params, s.as_window(), 0).is_err());
}

#[test]
fn forecasts_are_finite_with_valid_distributions() {
    let params = Params::init(&config()).unwrap();
    for len in [1, 3, 17, 200] {
        let out = forecast(&params, wave(len, FreqClass::Day).as_window(), 30).unwrap();
        assert_eq!(out.point.len(), 30);
        for (d, p) in out.dists.iter().zip(&out.point) {
            assert!(d.mu.is_finite() && d.nu > 2.0 && d.sigma > 0.0);
            assert_eq!(d.mu, *p);
        }
        assert!(out.confidence > 0.0 && out.confidence < 1.0);
    }
}

#[test]
fn point_forecast_follows_the_input_scale() {
    // Per-window normalization makes forecasts equivariant to affine maps.
    let params = Params::init(&config()).unwrap();
    let s = wave(64, FreqClass::Day);
    let shifted = s
        .with_values("w", s.values().iter().map(|v| 3.0 * v + 100.0).collect())
        .unwrap();
    let a = forecast(&params, s.as_window(), 10).unwrap();
    let b = forecast(&params, shifted.as_window(), 10).unwrap();
    for (x, y) in a.point.iter().zip(&b.point) {
        assert!((3.0 * x + 100.0 - y).abs() < 1e-9);
    }
    assert!((a.confidence - b.confidence).abs() < 1e-12);
}

#[test]
fn embeddings_are_deterministic_and_sized() {
    let params = Params::init(&config()).unwrap();
    let s = wave(70, FreqClass::Day);
    let a = embed_series(&params, s.as_window()).unwrap();
    let b = embed_series(&params, s.clone().as_window()).unwrap();
    assert_eq!(a.len(), 16);
    assert_eq!(a, b);
    let short = embed_series(&params, wave(3, FreqClass::Day).as_window()).unwrap();
    assert!(short.iter().all(|v| v.is_finite()));
}

#[test]
fn save_load_round_trip_is_byte_exact() {
    let dir = tempfile::tempdir().unwrap();
    let params = Params::init(&ModelConfig {
        positional_embedding: true,
        ..config()
    })
    .unwrap();
    let (p1, p2) = (dir.path().join("a.json"), dir.path().join("b.json"));
    params.save(&p1).unwrap();
    let loaded = Params::load(&p1).unwrap();
    loaded.save(&p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(loaded, params);

    let s = wave(90, FreqClass::Day);
    let before = forecast(&params, s.as_window(), 13).unwrap();
    let after = forecast(&loaded, s.as_window(), 13).unwrap();
    assert_eq!(before, after);
    for (a, b) in before.point.iter().zip(&after.point) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn tampered_files_are_rejected() {
    let params = Params::init(&config()).unwrap();
    let path = std::path::Path::new("model.json");
    let mut doc: serde_json::Value = serde_json::from_str(&params.to_json()).unwrap();
    doc["arrays"]["layer0.gate.w"]["shape"] = serde_json::json!([16, 3]);
    match Params::from_json(&doc.to_string(), path) {
        Err(TsfmError::Shape { name, .. }) => assert_eq!(name, "layer0.gate.w"),
        other => panic!("expected shape error, got {other:?}"),
    }

    let mut doc: serde_json::Value = serde_json::from_str(&params.to_json()).unwrap();
    doc["arrays"]["head8.b"]["values"]
        .as_array_mut()
        .unwrap()
        .pop();
    assert!(
        matches!(Params::from_json(&doc.to_string(), path), Err(TsfmError::Shape { name, .. }) if name == "head8.b")
    );

    let mut doc: serde_json::Value = serde_json::from_str(&params.to_json()).unwrap();
    doc["arrays"].as_object_mut().unwrap().remove("calendar.w");
    assert!(
        matches!(Params::from_json(&doc.to_string(), path), Err(TsfmError::Shape { name, .. }) if name == "calendar.w")
    );

    let mut doc: serde_json::Value = serde_json::from_str(&params.to_json()).unwrap();
    doc["config"]["d_model"] = serde_json::json!(32);
    assert!(matches!(
        Params::from_json(&doc.to_string(), path),
        Err(TsfmError::Shape { .. })
    ));

    let mut doc: serde_json::Value = serde_json::from_str(&params.to_json()).unwrap();
    doc["format_version"] = serde_json::json!(99);
    assert!(matches!(
        Params::from_json(&doc.to_string(), path),
        Err(TsfmError::Version {
            found: 99,
            expected: 1
        })
    ));

    assert!(matches!(
        Params::from_json("{not json", path),
        Err(TsfmError::Format { .. })
    ));
}

#[test]
fn forecaster_adapter_plugs_into_the_benchmark() {
    let model = TsfmForecaster::new(Params::init(&config()).unwrap());
    let s = wave(80, FreqClass::Day);
    let dist = model
        .predict_distribution(s.as_window(), 5)
        .unwrap()
        .unwrap();
    assert_eq!(dist.len(), 5);
    let c = model.confidence(s.as_window(), 5).unwrap();
    assert!(c > 0.0 && c < 1.0);
    let report = rolling_benchmark(
        &[&model],
        &[("waves".into(), vec![s])],
        &BenchConfig::new(6, 3),
    )
    .unwrap();
    let row = report.get("tsfm", "waves").unwrap();
    assert_eq!(row.windows, 3);
    assert!(row.nll.is_some());
}
