use hybridcast_core::data::*;
use hybridcast_core::decomp::{loess, stl_decompose};
use hybridcast_core::rng::rng_from_seed;
use proptest::prelude::*;
use rand::Rng;
use std::io::Write;

/// Sakamoto's day-of-week, shifted so Monday = 0.
fn weekday_oracle(y: i32, m: u32, d: u32) -> u32 {
    const T: [i32; 12] = [0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4];
    let y = if m < 3 { y - 1 } else { y };
    let sunday0 = (y + y / 4 - y / 100 + y / 400 + T[m as usize - 1] + d as i32).rem_euclid(7);
    ((sunday0 + 6) % 7) as u32
}

#[test]
fn calendar_day_of_week_matches_oracle() {
    let start = parse_timestamp("2024-01-01T00:00:00Z").unwrap();
    let s = TimeSeries::new("d", Frequency::new(FreqClass::Day), start, vec![0.0; 800]).unwrap();
    assert_eq!(calendar_features(&s, 0).unwrap().day_of_week, 0);
    assert_eq!(calendar_features(&s, 7).unwrap().day_of_week, 0);
    for i in 0..800 {
        let f = calendar_features(&s, i).unwrap();
        let ts = s.timestamp(i as i64);
        let (y, m, d) = (
            ts.format("%Y").to_string().parse().unwrap(),
            f.month,
            f.day_of_month,
        );
        assert_eq!(f.day_of_week, weekday_oracle(y, m, d), "index {i}");
    }
    assert!(calendar_features(&s, 800).is_err());
}

#[test]
fn monthly_index_eleven_is_december() {
    let start = parse_timestamp("2024-01").unwrap();
    let s = TimeSeries::new("m", Frequency::new(FreqClass::Month), start, vec![1.0; 12]).unwrap();
    assert_eq!(calendar_features(&s, 11).unwrap().month, 12);
}

#[test]
fn ingestion_examples_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let jsonl = dir.path().join("a.jsonl");
    let mut f = std::fs::File::create(&jsonl).unwrap();
    writeln!(
        f,
        r#"{{"id":"a","freq":"day","start":"2024-01-01T00:00:00Z","values":[1,2,3]}}"#
    )
    .unwrap();
    writeln!(
        f,
        r#"{{"id":"bad","freq":"day","start":"2024-01-01T00:00:00Z","values":[1,"NaN"]}}"#
    )
    .unwrap();
    writeln!(f, r#"{{"id":"h","freq":"hour","start":"2024-03-05T06:00:00Z","values":[0.1,-2.5e-7],"period":12}}"#).unwrap();
    drop(f);
    let got = ingest(&jsonl, Format::Jsonl).unwrap();
    assert_eq!(got.series.len(), 2);
    assert_eq!(got.series[0].values(), &[1.0, 2.0, 3.0]);
    assert_eq!(got.rejected.len(), 1);
    assert_eq!(got.rejected[0].id, "bad");

    let out = dir.path().join("out.jsonl");
    write_jsonl(&out, &got.series).unwrap();
    let again = ingest(&out, Format::Jsonl).unwrap();
    assert_eq!(again.series, got.series);

    let csv = dir.path().join("b.csv");
    std::fs::write(
        &csv,
        "id,timestamp,value\na,2024-01-01,1.0\na,2024-01-02,2.0\n",
    )
    .unwrap();
    let c = ingest(&csv, Format::Csv).unwrap();
    assert_eq!(c.series.len(), 1);
    assert_eq!(c.series[0].id, "a");
    assert_eq!(c.series[0].values(), &[1.0, 2.0]);
}

#[test]
fn ingestion_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("e.jsonl");
    std::fs::write(&empty, "").unwrap();
    assert!(matches!(
        ingest(&empty, Format::Jsonl),
        Err(hybridcast_core::Error::EmptyInput(_))
    ));
    let bad = dir.path().join("b.jsonl");
    std::fs::write(
        &bad,
        "{\"id\":\"a\",\"freq\":\"day\",\"start\":\"2024-01-01\",\"values\":[1]}\n{oops\n",
    )
    .unwrap();
    match ingest(&bad, Format::Jsonl) {
        Err(hybridcast_core::Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected parse error, got {other:?}"),
    }
    assert!(matches!(
        ingest(&dir.path().join("missing.jsonl"), Format::Jsonl),
        Err(hybridcast_core::Error::Io { .. })
    ));
}

#[test]
fn normalize_examples() {
    let s = TimeSeries::from_values("c", Frequency::new(FreqClass::Day), vec![2.0; 3]).unwrap();
    let (z, st) = normalize(&s);
    assert_eq!(z, vec![0.0; 3]);
    assert_eq!((st.mean, st.std), (2.0, 1e-8));
    let s = TimeSeries::from_values("c", Frequency::new(FreqClass::Day), vec![0.0, 2.0]).unwrap();
    assert_eq!(normalize(&s).0, vec![-1.0, 1.0]);
}

#[test]
fn stl_reconstructs_fifty_random_series() {
    let mut rng = rng_from_seed(1);
    for _ in 0..50 {
        let period = rng.random_range(2..=24);
        let len = rng.random_range(2 * period..=300);
        let v: Vec<f64> = (0..len).map(|_| rng.random_range(-100.0..100.0)).collect();
        let s = TimeSeries::from_values("r", Frequency::new(FreqClass::Day), v.clone()).unwrap();
        let d = stl_decompose(&s, period, 2).unwrap();
        for (a, b) in d.reconstruct().iter().zip(&v) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

proptest! {
    #[test]
    fn normalize_round_trip(v in prop::collection::vec(-1e6f64..1e6, 2..200)) {
        let s = TimeSeries::from_values("p", Frequency::new(FreqClass::Hour), v.clone()).unwrap();
        let (z, st) = normalize(&s);
        let back = denormalize(&z, &st);
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        for (a, b) in back.iter().zip(&v) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn calendar_is_pure_and_in_range(days in 0i64..100_000, class_idx in 0usize..6, index in 0usize..500) {
        let start = default_start() + chrono::Duration::days(days);
        let s = TimeSeries::new("p", Frequency::new(FreqClass::ALL[class_idx]), start, vec![0.0; 500]).unwrap();
        let a = calendar_features(&s, index).unwrap();
        prop_assert_eq!(a, calendar_features(&s, index).unwrap());
        prop_assert!(a.day_of_week <= 6);
        prop_assert!((1..=31).contains(&a.day_of_month));
        prop_assert!((1..=12).contains(&a.month));
        prop_assert!((0.0..1.0).contains(&a.fraction_of_cycle));
    }

    #[test]
    fn jsonl_round_trip(v in prop::collection::vec(-1e9f64..1e9, 1..50), class_idx in 0usize..6, mins in 0i64..10_000_000) {
        let start = default_start() + chrono::Duration::minutes(mins);
        let s = TimeSeries::new("x", Frequency::new(FreqClass::ALL[class_idx]), start, v).unwrap();
        let text = to_jsonl(std::slice::from_ref(&s));
        let parsed = parse_jsonl(&text, "mem").unwrap();
        prop_assert_eq!(parsed.series, vec![s]);
    }

    #[test]
    fn loess_reproduces_lines(a in -10.0f64..10.0, b in -10.0f64..10.0, n in 5usize..80, span in 0.2f64..1.0) {
        let v: Vec<f64> = (0..n).map(|t| a + b * t as f64).collect();
        let out = loess(&v, span, 1).unwrap();
        for (x, y) in out.iter().zip(&v) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn stl_reconstruction_identity(v in prop::collection::vec(-1e3f64..1e3, 24..120), period in 2usize..12) {
        let s = TimeSeries::from_values("p", Frequency::new(FreqClass::Day), v.clone()).unwrap();
        let d = stl_decompose(&s, period, 2).unwrap();
        for (a, b) in d.reconstruct().iter().zip(&v) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}
