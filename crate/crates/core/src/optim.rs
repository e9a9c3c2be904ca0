//! Adam optimizer over a fixed list of flat parameter arrays.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    /// Optimizer state for arrays of the given lengths, in order.
    pub fn new(cfg: AdamConfig, sizes: impl IntoIterator<Item = usize>) -> Self {
        let (m, v) = sizes
            .into_iter()
            .map(|n| (vec![0.0; n], vec![0.0; n]))
            .unzip();
        Self { cfg, t: 0, m, v }
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    /// One update. `params` yields `(parameter, gradient)` pairs in the
    /// order given to [`Adam::new`].
    pub fn step<'a, I>(&mut self, params: I)
    where
        I: IntoIterator<Item = (&'a mut [f64], &'a [f64])>,
    {
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for (k, (theta, g)) in params.into_iter().enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            assert_eq!(theta.len(), m.len(), "parameter {k} changed size");
            for i in 0..theta.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                theta[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = vec![1.0, -2.0];
        let g = vec![0.5, -3.0];
        let mut opt = Adam::new(AdamConfig::with_lr(0.1), [2]);
        opt.step([(p.as_mut_slice(), g.as_slice())]);
        // m̂ = g, v̂ = g², so the step is lr·g/(|g| + ε).
        assert!((p[0] - (1.0 - 0.1 * 0.5 / (0.5 + 1e-8))).abs() < 1e-15);
        assert!((p[1] - (-2.0 + 0.1 * 3.0 / (3.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut p = vec![0.25, 7.0, -1.5];
        let orig = p.clone();
        let mut opt = Adam::new(AdamConfig::with_lr(0.0), [3]);
        for _ in 0..5 {
            opt.step([(p.as_mut_slice(), [1.0, -2.0, 3.0].as_slice())]);
        }
        assert_eq!(p, orig);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut x = vec![5.0];
        let mut opt = Adam::new(AdamConfig::with_lr(0.1), [1]);
        for _ in 0..500 {
            let g = vec![2.0 * (x[0] - 1.5)];
            opt.step([(x.as_mut_slice(), g.as_slice())]);
        }
        assert!((x[0] - 1.5).abs() < 1e-3);
    }
}
