//! Teacher-forced NLL training with Adam and optional DRO dataset weighting.

use std::collections::BTreeMap;

use hybridcast_core::dromix::{
    excess_loss, fit_reference, sample_windows_with, GroupWeights, LossMetric, DEFAULT_SMOOTHING,
    DEFAULT_STEP_SIZE,
};
use hybridcast_core::optim::Adam;
use hybridcast_core::rng::{derive_seed_str, rng_from_seed};
use hybridcast_core::{Error, TimeSeries};

use crate::config::{DroMode, DroSettings, ModelConfig, TrainConfig};
use crate::error::{Result, TsfmError};
use crate::mat::Mat;
use crate::model::{batch_loss, loss_and_grad, Sample};
use crate::params::Params;
use crate::tokenize::tokenize_window;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: Params,
    /// Batch loss before each update.
    pub losses: Vec<f64>,
    /// Dataset weights: the initial vector, then one per DRO update.
    pub weights: Vec<GroupWeights>,
    /// Reference loss per dataset (DRO runs only).
    pub reference: BTreeMap<String, f64>,
    /// Probe loss per dataset at each DRO update.
    pub probe_losses: Vec<BTreeMap<String, f64>>,
}

/// Window length needed for one training sample of `series`.
pub fn sample_len(cfg: &ModelConfig, series: &TimeSeries) -> usize {
    (cfg.context_patches + 1) * cfg.patch_len_for(series.freq.class)
}

/// The sample whose context starts at `start`: `context_patches` tokens and,
/// for each, the following patch as target, all normalized by the context
/// statistics.
pub fn training_sample(
    cfg: &ModelConfig,
    series: &TimeSeries,
    start: usize,
    weight: f64,
) -> Result<Sample> {
    let p = cfg.patch_len_for(series.freq.class);
    let c = cfg.context_patches;
    let len = (c + 1) * p;
    if start + len > series.len() {
        return Err(Error::TooShort {
            needed: start + len,
            got: series.len(),
        }
        .into());
    }
    let w = series.window(start..start + len);
    let tk = tokenize_window(w.slice(0..c * p), p, c)?;
    let target = Mat::from_vec(c, p, tk.stats.apply(&w.values[p..]));
    Ok(Sample {
        tokens: tk.tokens,
        freq: series.freq,
        target,
        target_mask: vec![true; c * p],
        weight,
    })
}

/// Fixed probe windows of one dataset: the most recent window of each long
/// enough series, then windows stepping back one patch, round-robin.
fn probe_samples(cfg: &ModelConfig, series: &[TimeSeries], count: usize) -> Result<Vec<Sample>> {
    let eligible: Vec<&TimeSeries> = series
        .iter()
        .filter(|s| s.len() >= sample_len(cfg, s))
        .collect();
    let mut out = Vec::with_capacity(count);
    if eligible.is_empty() {
        return Ok(out);
    }
    for j in 0..count {
        let s = eligible[j % eligible.len()];
        let back = (j / eligible.len()) * cfg.patch_len_for(s.freq.class);
        let last = s.len() - sample_len(cfg, s);
        if back <= last {
            out.push(training_sample(cfg, s, last - back, 1.0)?);
        }
    }
    Ok(out)
}

pub fn train(
    config: &ModelConfig,
    tc: &TrainConfig,
    datasets: &BTreeMap<String, Vec<TimeSeries>>,
) -> Result<TrainOutcome> {
    train_from(Params::init(config)?, tc, datasets)
}

/// Continues training from `params`; the optimizer starts fresh.
pub fn train_from(
    params: Params,
    tc: &TrainConfig,
    datasets: &BTreeMap<String, Vec<TimeSeries>>,
) -> Result<TrainOutcome> {
    train_observed(params, tc, datasets, |_, _, _| {})
}

/// [`train_from`] calling `observer(step, params, loss)` after each update.
pub fn train_observed<F>(
    mut params: Params,
    tc: &TrainConfig,
    datasets: &BTreeMap<String, Vec<TimeSeries>>,
    mut observer: F,
) -> Result<TrainOutcome>
where
    F: FnMut(usize, &Params, f64),
{
    if datasets.is_empty() || datasets.values().all(Vec::is_empty) {
        return Err(Error::EmptyInput("datasets".into()).into());
    }
    if tc.batch_size == 0 {
        return Err(Error::arg("batch_size must be at least 1").into());
    }
    if let Some(clip) = tc.grad_clip {
        if clip.is_nan() || clip <= 0.0 {
            return Err(Error::arg("grad_clip must be positive").into());
        }
    }
    let cfg = params.config().clone();
    let (step_size, smoothing) = match &tc.dro {
        Some(d) => {
            if d.update_every == 0 || d.probe_windows == 0 {
                return Err(
                    Error::arg("DRO update_every and probe_windows must be positive").into(),
                );
            }
            (d.step_size, d.smoothing)
        }
        None => (DEFAULT_STEP_SIZE, DEFAULT_SMOOTHING),
    };
    let uniform = GroupWeights::uniform(datasets.keys().cloned(), step_size, smoothing)?;
    let mut weights = uniform.clone();
    let mut trajectory = vec![weights.clone()];
    let mut reference = BTreeMap::new();
    let mut probes: BTreeMap<String, Vec<Sample>> = BTreeMap::new();
    if let Some(d) = &tc.dro {
        for (id, series) in datasets {
            let r = match fit_reference(series, d.reference, LossMetric::Nll) {
                Ok(fit) => fit.loss,
                Err(e) => {
                    log::warn!("dataset {id}: no reference loss ({e}); excess uses 0");
                    0.0
                }
            };
            reference.insert(id.clone(), r);
            probes.insert(id.clone(), probe_samples(&cfg, series, d.probe_windows)?);
        }
    }

    let mut rng = rng_from_seed(derive_seed_str(cfg.seed, "train"));
    let mut adam = Adam::new(cfg.optimizer, params.arrays().iter().map(|a| a.data.len()));
    let mut losses = Vec::with_capacity(tc.steps);
    let mut probe_losses = Vec::new();
    let n_datasets = datasets.len() as f64;
    for step in 0..tc.steps {
        let multiplier = matches!(
            &tc.dro,
            Some(DroSettings {
                mode: DroMode::LossMultiplier,
                ..
            })
        );
        let sampling = if multiplier { &uniform } else { &weights };
        let items = sample_windows_with(&mut rng, datasets, sampling, tc.batch_size, |s| {
            sample_len(&cfg, s)
        })?;
        let batch = items
            .iter()
            .map(|it| {
                let w = if multiplier {
                    n_datasets * weights.get(&it.dataset).expect("weight per dataset")
                } else {
                    1.0
                };
                training_sample(&cfg, &datasets[&it.dataset][it.series], it.start, w)
            })
            .collect::<Result<Vec<_>>>()?;
        let diverged = |params: Params, reason: String| TsfmError::Diverged {
            step,
            reason,
            checkpoint: Box::new(params),
        };
        let (loss, mut grads) = match loss_and_grad(&params, &batch) {
            Ok(r) => r,
            Err(e @ TsfmError::NonFinite { .. }) => return Err(diverged(params, e.to_string())),
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            return Err(diverged(params, format!("loss {loss}")));
        }
        if let Some(clip) = tc.grad_clip {
            let norm = grads
                .iter()
                .flat_map(|g| &g.data)
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            if norm > clip {
                let s = clip / norm;
                grads
                    .iter_mut()
                    .flat_map(|g| g.data.iter_mut())
                    .for_each(|v| *v *= s);
            }
        }
        let before = params.clone();
        adam.step(
            params
                .arrays_mut()
                .iter_mut()
                .map(|a| a.data.as_mut_slice())
                .zip(grads.iter().map(|g| g.data.as_slice())),
        );
        if let Err(e) = params.check_finite() {
            return Err(diverged(before, e.to_string()));
        }
        losses.push(loss);
        observer(step, &params, loss);
        if step % 100 == 0 {
            log::debug!("step {step}: loss {loss:.5}");
        }

        if let Some(d) = &tc.dro {
            if (step + 1) % d.update_every == 0 {
                let mut current = BTreeMap::new();
                for (id, samples) in &probes {
                    let l = if samples.is_empty() {
                        reference[id]
                    } else {
                        batch_loss(&params, samples)?
                    };
                    current.insert(id.clone(), l);
                }
                let excess = excess_loss(&current, &reference)?;
                weights = weights.update(&excess)?;
                trajectory.push(weights.clone());
                probe_losses.push(current);
            }
        }
    }
    Ok(TrainOutcome {
        params,
        losses,
        weights: trajectory,
        reference,
        probe_losses,
    })
}
