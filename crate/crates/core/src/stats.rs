//! Special functions, the location-scale Student-T likelihood, and small
//! descriptive statistics shared across modules.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx)
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Digamma ψ(x) for `x > 0`: upward recurrence to x ≥ 10, then the asymptotic series.
pub fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    acc + x.ln() - 0.5 * inv - series
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Derivative of softplus, i.e. the logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Location-scale Student-T predictive distribution for one future step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentT {
    pub nu: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl StudentT {
    pub fn nll(&self, y: f64) -> f64 {
        student_t_nll(y, self.nu, self.mu, self.sigma)
    }
}

/// Negative log-density of a location-scale Student-T at `y`.
pub fn student_t_nll(y: f64, nu: f64, mu: f64, sigma: f64) -> f64 {
    let z = (y - mu) / sigma;
    -ln_gamma(0.5 * (nu + 1.0))
        + ln_gamma(0.5 * nu)
        + 0.5 * (nu * PI).ln()
        + sigma.ln()
        + 0.5 * (nu + 1.0) * (z * z / nu).ln_1p()
}

/// Partial derivatives of [`student_t_nll`] with respect to `(nu, mu, sigma)`.
pub fn student_t_nll_grad(y: f64, nu: f64, mu: f64, sigma: f64) -> (f64, f64, f64) {
    let z = (y - mu) / sigma;
    let r = 1.0 + z * z / nu;
    let d_nu = -0.5 * digamma(0.5 * (nu + 1.0))
        + 0.5 * digamma(0.5 * nu)
        + 0.5 / nu
        + 0.5 * (z * z / nu).ln_1p()
        - 0.5 * (nu + 1.0) * z * z / (nu * nu * r);
    let k = (nu + 1.0) * z / (nu * r * sigma);
    let d_mu = -k;
    let d_sigma = 1.0 / sigma - k * z;
    (d_nu, d_mu, d_sigma)
}

pub fn gaussian_nll(y: f64, mu: f64, sigma: f64) -> f64 {
    let z = (y - mu) / sigma;
    0.5 * (2.0 * PI * sigma * sigma).ln() + 0.5 * z * z
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median absolute deviation scaled by 1.4826 (consistent for Gaussian data).
pub fn robust_scale(xs: &[f64]) -> f64 {
    let m = median(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m).abs()).collect();
    1.4826 * median(&dev)
}

pub fn autocorr(xs: &[f64], lag: usize) -> f64 {
    if xs.len() <= lag {
        return 0.0;
    }
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    if denom <= 0.0 {
        return 0.0;
    }
    let num: f64 = xs
        .iter()
        .zip(&xs[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum();
    num / denom
}

/// Least-squares slope of `xs` against its index.
pub fn ols_slope(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let tm = (n - 1) as f64 / 2.0;
    let ym = mean(xs);
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, y) in xs.iter().enumerate() {
        let dt = t as f64 - tm;
        num += dt * (y - ym);
        den += dt * dt;
    }
    num / den
}
