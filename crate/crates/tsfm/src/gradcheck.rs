//! Central finite-difference verification of [`loss_and_grad`].

use crate::error::Result;
use crate::model::{batch_loss, loss_and_grad, Sample};
use crate::params::Params;

/// Worst coordinate of one parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares every gradient coordinate with `(L(θ+h) − L(θ−h)) / 2h`.
pub fn finite_difference_check(
    params: &Params,
    batch: &[Sample],
    h: f64,
    floor: f64,
) -> Result<Vec<ArrayCheck>> {
    let (_, grads) = loss_and_grad(params, batch)?;
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(grads.len());
    for (k, g) in grads.iter().enumerate() {
        let mut worst = ArrayCheck {
            name: params.names()[k].clone(),
            max_rel_err: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for c in 0..g.data.len() {
            let orig = probe.arrays()[k].data[c];
            probe.arrays_mut()[k].data[c] = orig + h;
            let up = batch_loss(&probe, batch)?;
            probe.arrays_mut()[k].data[c] = orig - h;
            let down = batch_loss(&probe, batch)?;
            probe.arrays_mut()[k].data[c] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(g.data[c], numeric, floor);
            if err > worst.max_rel_err || c == 0 {
                worst.max_rel_err = err;
                worst.worst_index = c;
                worst.analytic = g.data[c];
                worst.numeric = numeric;
            }
        }
        out.push(worst);
    }
    Ok(out)
}
