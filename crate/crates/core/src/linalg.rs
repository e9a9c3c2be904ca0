//! Dense least squares via Householder QR.
//!
//! Rank deficiency is detected from the diagonal of `R`; in that case the
//! problem is re-solved with a ridge penalty by QR of the augmented system
//! `[X; sqrt(λ)·I] β ≈ [y; 0]`, and the result is flagged.

use crate::error::{Error, Result};

pub const RIDGE_LAMBDA: f64 = 1e-6;

/// Relative threshold on `|R_jj| / max_i |R_ii|` below which the design is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Lstsq {
    pub coef: Vec<f64>,
    /// True when the plain problem was rank deficient and the ridge
    /// fallback was used.
    pub ridged: bool,
}

/// Row-major design matrix helper.
#[derive(Debug, Clone)]
pub struct Design {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Design {
    pub fn new(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row width mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Solves `min ||Xβ − y||²`, falling back to ridge with `RIDGE_LAMBDA` when
/// `X` is rank deficient.
pub fn lstsq(x: &Design, y: &[f64]) -> Result<Lstsq> {
    if x.rows != y.len() {
        return Err(Error::arg("design rows and targets differ in length"));
    }
    if x.rows < x.cols {
        return Err(Error::arg(format!(
            "underdetermined system: {} rows for {} unknowns",
            x.rows, x.cols
        )));
    }
    match qr_solve(x.data.clone(), x.rows, x.cols, y.to_vec()) {
        Some(coef) => Ok(Lstsq {
            coef,
            ridged: false,
        }),
        None => ridge(x, y, RIDGE_LAMBDA).map(|coef| Lstsq { coef, ridged: true }),
    }
}

pub fn ridge(x: &Design, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let (n, p) = (x.rows, x.cols);
    let mut a = x.data.clone();
    a.resize((n + p) * p, 0.0);
    let s = lambda.sqrt();
    for j in 0..p {
        a[(n + j) * p + j] = s;
    }
    let mut b = y.to_vec();
    b.resize(n + p, 0.0);
    qr_solve(a, n + p, p, b).ok_or_else(|| Error::Numeric("ridge system is singular".into()))
}

/// Householder QR on a row-major `m×n` matrix; returns `None` when rank
/// deficient.
fn qr_solve(mut a: Vec<f64>, m: usize, n: usize, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let idx = |i: usize, j: usize| i * n + j;
    let mut diag = vec![0.0; n];
    for k in 0..n {
        let norm = (k..m).map(|i| a[idx(i, k)].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            diag[k] = 0.0;
            continue;
        }
        let alpha = if a[idx(k, k)] > 0.0 { -norm } else { norm };
        // v = x − alpha·e1, stored in column k below the diagonal.
        a[idx(k, k)] -= alpha;
        let vnorm2: f64 = (k..m).map(|i| a[idx(i, k)].powi(2)).sum();
        if vnorm2 > 0.0 {
            for j in k + 1..n {
                let dot: f64 = (k..m).map(|i| a[idx(i, k)] * a[idx(i, j)]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..m {
                    a[idx(i, j)] -= f * a[idx(i, k)];
                }
            }
            let dot: f64 = (k..m).map(|i| a[idx(i, k)] * b[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                b[i] -= f * a[idx(i, k)];
            }
        }
        diag[k] = alpha;
    }
    let scale = diag.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    if scale == 0.0 || diag.iter().any(|d| d.abs() <= RANK_TOL * scale) {
        return None;
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[idx(k, j)] * x[j];
        }
        x[k] = s / diag[k];
    }
    Some(x)
}
