//! Patch tokenization of a normalized context window.

use hybridcast_core::{CalendarFeatures, Error, NormStats, TimeSeries, Window};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct PatchToken {
    /// Normalized values; padded slots hold 0.
    pub values: Vec<f64>,
    /// `true` marks a padded slot.
    pub pad_mask: Vec<bool>,
    /// Calendar of the patch's final position.
    pub calendar: CalendarFeatures,
    pub scale: usize,
}

impl PatchToken {
    pub fn is_fully_padded(&self) -> bool {
        self.pad_mask.iter().all(|&p| p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tokenized {
    pub tokens: Vec<PatchToken>,
    pub stats: NormStats,
}

pub fn tokenize(
    series: &TimeSeries,
    patch_len: usize,
    context_patches: usize,
) -> Result<Tokenized> {
    tokenize_window(series.as_window(), patch_len, context_patches)
}

/// The last `patch_len · context_patches` points of `window`, normalized with
/// their own statistics and left-padded when the window is shorter. Always
/// yields exactly `context_patches` tokens.
pub fn tokenize_window(
    window: Window<'_>,
    patch_len: usize,
    context_patches: usize,
) -> Result<Tokenized> {
    if window.is_empty() {
        return Err(Error::EmptyInput("context window".into()).into());
    }
    if patch_len == 0 || context_patches == 0 {
        return Err(Error::arg("patch_len and context_patches must be positive").into());
    }
    let span = patch_len * context_patches;
    let t = window.len();
    let ctx = &window.values[t.saturating_sub(span)..];
    let stats = NormStats::fit(ctx);
    let normed = stats.apply(ctx);
    let pad = span - ctx.len();
    // Series index of padded-buffer slot 0; negative when padding.
    let origin = t as i64 - span as i64;
    let tokens = (0..context_patches)
        .map(|i| {
            let mut values = vec![0.0; patch_len];
            let mut pad_mask = vec![true; patch_len];
            for j in 0..patch_len {
                let b = i * patch_len + j;
                if b >= pad {
                    values[j] = normed[b - pad];
                    pad_mask[j] = false;
                }
            }
            let last = origin + ((i + 1) * patch_len) as i64 - 1;
            PatchToken {
                values,
                pad_mask,
                calendar: CalendarFeatures::at(window.timestamp(last), window.freq.class),
                scale: patch_len,
            }
        })
        .collect();
    Ok(Tokenized { tokens, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use hybridcast_core::{FreqClass, Frequency};

    fn series(values: Vec<f64>) -> TimeSeries {
        TimeSeries::from_values("s", Frequency::new(FreqClass::Day), values).unwrap()
    }

    #[test]
    fn exact_division_has_no_padding() {
        let s = series((0..32).map(f64::from).collect());
        let tk = tokenize(&s, 8, 4).unwrap();
        assert_eq!(tk.tokens.len(), 4);
        assert!(tk.tokens.iter().all(|t| t.pad_mask.iter().all(|p| !p)));
    }

    #[test]
    fn short_series_is_left_padded() {
        let s = series((0..10).map(f64::from).collect());
        let tk = tokenize(&s, 8, 2).unwrap();
        assert_eq!(tk.tokens.len(), 2);
        assert_eq!(tk.tokens[0].pad_mask.iter().filter(|&&p| p).count(), 6);
        assert!(tk.tokens[1].pad_mask.iter().all(|p| !p));
        assert_eq!(&tk.tokens[0].values[..6], &[0.0; 6]);
    }

    #[test]
    fn constant_series_normalizes_to_zero() {
        let tk = tokenize(&series(vec![5.0; 20]), 4, 5).unwrap();
        assert!(tk.tokens.iter().flat_map(|t| &t.values).all(|v| *v == 0.0));
    }

    #[test]
    fn older_history_is_truncated() {
        let s = series((0..100).map(f64::from).collect());
        let tk = tokenize(&s, 8, 2).unwrap();
        let expect = NormStats::fit(&s.values()[84..]);
        assert_eq!(tk.stats, expect);
        let last = tk.tokens[1].calendar;
        assert_eq!(last, CalendarFeatures::at(s.timestamp(99), FreqClass::Day));
    }

    #[test]
    fn empty_window_errors() {
        let s = series(vec![1.0]);
        let w = s.as_window().slice(0..0);
        assert!(tokenize_window(w, 4, 2).is_err());
    }
}
