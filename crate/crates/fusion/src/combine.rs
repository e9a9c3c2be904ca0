//! Fixed combinations of member forecasts.

use hybridcast_core::linalg::{lstsq, Design};
use hybridcast_core::{Error, Result};
use serde::{Deserialize, Serialize};

fn check_lengths(forecasts: &[Vec<f64>]) -> Result<usize> {
    let first = forecasts
        .first()
        .ok_or_else(|| Error::EmptyInput("forecasts".into()))?;
    if let Some(bad) = forecasts.iter().find(|f| f.len() != first.len()) {
        return Err(Error::arg(format!(
            "forecast lengths differ: {} vs {}",
            first.len(),
            bad.len()
        )));
    }
    Ok(first.len())
}

/// Elementwise `Σ_k f_k / K`.
pub fn fuse_average(forecasts: &[Vec<f64>]) -> Result<Vec<f64>> {
    let h = check_lengths(forecasts)?;
    let k = forecasts.len() as f64;
    Ok((0..h)
        .map(|t| forecasts.iter().map(|f| f[t]).sum::<f64>() / k)
        .collect())
}

/// `ŷ = b + Σ_k w_k f_k`; weights are unconstrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFusion {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Set when the fit needed the ridge fallback.
    pub ridged: bool,
}

impl LinearFusion {
    pub fn predict_point(&self, members: &[f64]) -> f64 {
        self.intercept
            + self
                .weights
                .iter()
                .zip(members)
                .map(|(w, f)| w * f)
                .sum::<f64>()
    }

    /// Combines per-member forecast vectors (pool order).
    pub fn combine(&self, forecasts: &[Vec<f64>]) -> Result<Vec<f64>> {
        let h = check_lengths(forecasts)?;
        if forecasts.len() != self.weights.len() {
            return Err(Error::arg(format!(
                "{} member forecasts for {} weights",
                forecasts.len(),
                self.weights.len()
            )));
        }
        Ok((0..h)
            .map(|t| {
                let row: Vec<f64> = forecasts.iter().map(|f| f[t]).collect();
                self.predict_point(&row)
            })
            .collect())
    }
}

/// Least-squares fit of `y_i ≈ b + w·f_i`, where row `i` holds the `K`
/// member predictions of target `y_i`. Needs at least `K + 1` rows; a rank
/// deficient design falls back to ridge and sets `ridged`.
pub fn fit_linear_fusion(rows: &[Vec<f64>], truth: &[f64]) -> Result<LinearFusion> {
    let k = check_lengths(rows)?;
    if rows.len() != truth.len() {
        return Err(Error::arg(format!(
            "{} rows for {} targets",
            rows.len(),
            truth.len()
        )));
    }
    if k == 0 {
        return Err(Error::arg("no members"));
    }
    if rows.len() < k + 1 {
        return Err(Error::TooShort {
            needed: k + 1,
            got: rows.len(),
        });
    }
    let mut x = Design::new(k + 1);
    let mut r = vec![1.0; k + 1];
    for row in rows {
        r[1..].copy_from_slice(row);
        x.push_row(&r);
    }
    let sol = lstsq(&x, truth)?;
    Ok(LinearFusion {
        intercept: sol.coef[0],
        weights: sol.coef[1..].to_vec(),
        ridged: sol.ridged,
    })
}

/// Mean squared error of `pred` against `truth`.
pub fn mse(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter()
        .zip(truth)
        .map(|(p, y)| (p - y).powi(2))
        .sum::<f64>()
        / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_examples() {
        assert_eq!(
            fuse_average(&[vec![1.0, 1.0], vec![3.0, 3.0]]).unwrap(),
            vec![2.0, 2.0]
        );
        let f = vec![0.1, 0.7, 2.0];
        assert_eq!(fuse_average(&[f.clone(), f.clone()]).unwrap(), f);
        assert!(fuse_average(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(fuse_average(&[]).is_err());
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            fit_linear_fusion(&[vec![1.0, 2.0], vec![2.0, 1.0]], &[1.0, 2.0]),
            Err(Error::TooShort { needed: 3, got: 2 })
        ));
    }
}
