use serde::{Deserialize, Serialize};

use crate::data::{FreqClass, Frequency, TimeSeries};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateMode {
    Mean,
    Sum,
}

fn fixed_seconds(class: FreqClass) -> Option<i64> {
    match class {
        FreqClass::Minute => Some(60),
        FreqClass::Hour => Some(3_600),
        FreqClass::Day => Some(86_400),
        FreqClass::Week => Some(604_800),
        FreqClass::Month | FreqClass::Quarter => None,
    }
}

/// Frequency after merging `factor` steps.
///
/// When the merged step is exactly a coarser class (60 minutes, 24 hours,
/// 7 days, 1440 minutes, 168 hours, 3 months, ...) the class changes and the
/// period resets to that class's default. Otherwise the class is kept, the
/// seasonal period shrinks to `max(1, round(period / factor))`, and the
/// timestamps implied by `start + index·freq` no longer match wall-clock
/// time.
pub(crate) fn aggregated_frequency(freq: Frequency, factor: usize) -> Frequency {
    let coarser = match fixed_seconds(freq.class) {
        Some(secs) => FreqClass::ALL
            .into_iter()
            .find(|c| fixed_seconds(*c) == Some(secs * factor as i64)),
        None if freq.class == FreqClass::Month && factor == 3 => Some(FreqClass::Quarter),
        None => None,
    };
    match coarser {
        Some(class) => Frequency::new(class),
        None => Frequency {
            class: freq.class,
            steps_per_cycle: ((freq.steps_per_cycle as f64 / factor as f64).round() as usize)
                .max(1),
        },
    }
}

/// Merges consecutive non-overlapping windows of `factor` points. A trailing
/// partial window is dropped.
pub fn frequency_aggregate(
    series: &TimeSeries,
    factor: usize,
    mode: AggregateMode,
) -> Result<TimeSeries> {
    if factor < 2 {
        return Err(Error::arg("aggregation factor must be at least 2"));
    }
    if factor > series.len() {
        return Err(Error::TooShort {
            needed: factor,
            got: series.len(),
        });
    }
    let values = series
        .values()
        .chunks_exact(factor)
        .map(|w| {
            let s: f64 = w.iter().sum();
            match mode {
                AggregateMode::Sum => s,
                AggregateMode::Mean => s / factor as f64,
            }
        })
        .collect();
    TimeSeries::new(
        format!("{}@x{factor}", series.id),
        aggregated_frequency(series.freq, factor),
        series.start,
        values,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(values: Vec<f64>, class: FreqClass) -> TimeSeries {
        TimeSeries::from_values("a", Frequency::new(class), values).unwrap()
    }

    #[test]
    fn sum_and_mean_windows() {
        let out = frequency_aggregate(
            &s(vec![1.0, 2.0, 3.0, 4.0], FreqClass::Day),
            2,
            AggregateMode::Sum,
        )
        .unwrap();
        assert_eq!(out.values(), &[3.0, 7.0]);
        let out = frequency_aggregate(
            &s(vec![1.0, 2.0, 3.0, 4.0, 5.0], FreqClass::Day),
            2,
            AggregateMode::Mean,
        )
        .unwrap();
        assert_eq!(out.values(), &[1.5, 3.5]);
    }

    #[test]
    fn constant_mean_is_invariant() {
        for factor in 2..7 {
            let out = frequency_aggregate(
                &s(vec![2.5; 20], FreqClass::Hour),
                factor,
                AggregateMode::Mean,
            )
            .unwrap();
            assert_eq!(out.len(), 20 / factor);
            assert!(out.values().iter().all(|v| (v - 2.5).abs() < 1e-15));
        }
    }

    #[test]
    fn frequency_metadata_mapping() {
        let f = |c, k| aggregated_frequency(Frequency::new(c), k);
        assert_eq!(f(FreqClass::Minute, 60), Frequency::new(FreqClass::Hour));
        assert_eq!(f(FreqClass::Minute, 1440), Frequency::new(FreqClass::Day));
        assert_eq!(f(FreqClass::Hour, 24), Frequency::new(FreqClass::Day));
        assert_eq!(f(FreqClass::Day, 7), Frequency::new(FreqClass::Week));
        assert_eq!(f(FreqClass::Month, 3), Frequency::new(FreqClass::Quarter));
        let odd = f(FreqClass::Hour, 2);
        assert_eq!(odd.class, FreqClass::Hour);
        assert_eq!(odd.steps_per_cycle, 12);
    }

    #[test]
    fn errors() {
        let x = s(vec![1.0, 2.0], FreqClass::Day);
        assert!(frequency_aggregate(&x, 3, AggregateMode::Sum).is_err());
        assert!(frequency_aggregate(&x, 1, AggregateMode::Sum).is_err());
    }
}
