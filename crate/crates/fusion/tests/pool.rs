mod common;

use hybridcast_core::baselines::{Naive, SeasonalNaive};
use hybridcast_core::eval::BenchConfig;
use hybridcast_core::{FreqClass, Frequency, TimeSeries};
use hybridcast_fusion::{profile, ModelPool, PoolMember};

fn member<F: hybridcast_core::Forecaster + 'static>(f: F) -> PoolMember {
    PoolMember::new(Box::new(f), "test", "none")
}

#[test]
fn naive_on_constant_data_is_perfect() {
    let pool = ModelPool::new(vec![member(Naive)]).unwrap();
    let data = vec![(
        "flat".to_string(),
        vec![TimeSeries::from_values("c", Frequency::new(FreqClass::Day), vec![4.5; 40]).unwrap()],
    )];
    let p = profile(&pool, &data, &BenchConfig::new(5, 3)).unwrap();
    let e = p.get("naive", "flat").unwrap();
    assert_eq!(e.fa, 1.0);
    assert_eq!(e.wmape, 0.0);
    assert_eq!(e.windows, 3);
    assert_eq!(e.mean_confidence, Some(1.0 / (1.0 + 0.0 / 1e-8)));
}

#[test]
fn dominant_member_ranks_first_everywhere() {
    let pool = ModelPool::new(vec![member(Naive), member(SeasonalNaive::default())]).unwrap();
    let datasets: Vec<(String, Vec<TimeSeries>)> = (0..3)
        .map(|d| {
            let series = (0..4)
                .map(|i| common::seasonal(96, 10 * d + i, i as usize))
                .collect();
            (format!("d{d}"), series)
        })
        .collect();
    let bench = BenchConfig::new(12, 4);
    // Seasonal naive beats naive on every single window of a strong cycle.
    for (_, series) in &datasets {
        for s in series {
            for o in bench.origins(s.len()).unwrap() {
                let w = s.window(0..o);
                let truth = &s.values()[o..o + 12];
                let err = |f: &dyn hybridcast_core::Forecaster| {
                    hybridcast_core::eval::wmape(truth, &f.predict(w, 12).unwrap()).unwrap()
                };
                assert!(err(&SeasonalNaive::default()) < err(&Naive));
            }
        }
    }
    let p = profile(&pool, &datasets, &bench).unwrap();
    assert_eq!(p.datasets(), vec!["d0", "d1", "d2"]);
    for d in p.datasets() {
        assert_eq!(p.ranking(&d), vec!["seasonal_naive", "naive"]);
    }
    assert!(p
        .get("seasonal_naive", "d0")
        .unwrap()
        .mean_confidence
        .is_none());
    assert!(p.to_csv().starts_with("member,dataset,fa,"));
}

#[test]
fn empty_dataset_list_gives_empty_profile() {
    let pool = ModelPool::new(vec![member(Naive)]).unwrap();
    assert!(profile(&pool, &[], &BenchConfig::new(4, 2))
        .unwrap()
        .entries
        .is_empty());
}

#[test]
fn short_dataset_is_skipped() {
    let pool = ModelPool::new(vec![member(Naive)]).unwrap();
    let short = TimeSeries::from_values("s", Frequency::new(FreqClass::Day), vec![1.0; 5]).unwrap();
    let long = TimeSeries::from_values("l", Frequency::new(FreqClass::Day), vec![1.0; 50]).unwrap();
    let data = vec![
        ("short".to_string(), vec![short]),
        ("long".to_string(), vec![long]),
    ];
    let p = profile(&pool, &data, &BenchConfig::new(4, 2)).unwrap();
    assert_eq!(p.datasets(), vec!["long"]);
}

#[test]
fn duplicate_names_rejected_and_renaming_allowed() {
    assert!(ModelPool::new(vec![member(Naive), member(Naive)]).is_err());
    let pool = ModelPool::new(vec![member(Naive), member(Naive).with_name("naive2")]).unwrap();
    assert_eq!(pool.names(), vec!["naive", "naive2"]);
    let data = vec![("d".to_string(), vec![common::trendy(60, 1, 0)])];
    let p = profile(&pool, &data, &BenchConfig::new(4, 2)).unwrap();
    assert_eq!(
        p.get("naive", "d").unwrap().fa,
        p.get("naive2", "d").unwrap().fa
    );
}

#[test]
fn fusion_requires_two_members() {
    let pool = ModelPool::new(vec![member(Naive)]).unwrap();
    assert!(pool.require_fusable().is_err());
}

#[test]
fn profile_is_deterministic() {
    let pool = common::specialist_pool();
    let data = vec![("mix".to_string(), common::regime_mixture(3, 80, 5))];
    let bench = BenchConfig::new(6, 3);
    assert_eq!(
        profile(&pool, &data, &bench).unwrap(),
        profile(&pool, &data, &bench).unwrap()
    );
}
