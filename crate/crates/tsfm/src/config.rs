use std::collections::BTreeMap;

use hybridcast_core::dromix::{ReferenceModel, DEFAULT_SMOOTHING, DEFAULT_STEP_SIZE};
use hybridcast_core::optim::AdamConfig;
use hybridcast_core::FreqClass;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TsfmError};

/// Architecture and optimizer constants. Serialized into every model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_experts: usize,
    pub top_k_experts: usize,
    /// Supported patch lengths, one embedding/head pair each.
    pub patch_lengths: Vec<usize>,
    pub context_patches: usize,
    pub d_ff: usize,
    /// Learned absolute position table added to the token embedding.
    #[serde(default)]
    pub positional_embedding: bool,
    /// Weight of the load-balancing auxiliary loss.
    #[serde(default)]
    pub aux_loss_coef: f64,
    /// Frequency class → patch length, replacing the default map.
    #[serde(default)]
    pub scale_overrides: BTreeMap<FreqClass, usize>,
    pub optimizer: AdamConfig,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_layers: 2,
            d_model: 64,
            n_heads: 4,
            n_experts: 4,
            top_k_experts: 2,
            patch_lengths: vec![8, 16],
            context_patches: 8,
            d_ff: 128,
            positional_embedding: false,
            aux_loss_coef: 0.0,
            scale_overrides: BTreeMap::new(),
            optimizer: AdamConfig::with_lr(1e-3),
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(TsfmError::Config(m));
        if self.n_layers == 0 || self.d_model == 0 || self.d_ff == 0 || self.context_patches == 0 {
            return fail("n_layers, d_model, d_ff and context_patches must be positive".into());
        }
        if self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return fail(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.top_k_experts == 0 || self.top_k_experts > self.n_experts {
            return fail(format!(
                "top_k_experts {} outside 1..={}",
                self.top_k_experts, self.n_experts
            ));
        }
        if self.patch_lengths.is_empty() || self.patch_lengths.contains(&0) {
            return fail("patch_lengths must be non-empty and positive".into());
        }
        let mut sorted = self.patch_lengths.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.patch_lengths.len() {
            return fail("patch_lengths must be distinct".into());
        }
        if let Some((class, p)) = self
            .scale_overrides
            .iter()
            .find(|(_, p)| !self.patch_lengths.contains(p))
        {
            return fail(format!(
                "scale override {}→{p} is not a configured patch length",
                class.as_str()
            ));
        }
        if !(self.aux_loss_coef.is_finite() && self.aux_loss_coef >= 0.0) {
            return fail("aux_loss_coef must be finite and non-negative".into());
        }
        if !(self.optimizer.lr.is_finite() && self.optimizer.lr >= 0.0) {
            return fail("learning rate must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Patch length used for a frequency class: the override if present,
    /// else minute/hour→16 and coarser→8, snapped to the nearest configured
    /// length (ties go to the shorter).
    pub fn patch_len_for(&self, class: FreqClass) -> usize {
        if let Some(p) = self.scale_overrides.get(&class) {
            return *p;
        }
        let preferred = match class {
            FreqClass::Minute | FreqClass::Hour => 16,
            _ => 8,
        };
        *self
            .patch_lengths
            .iter()
            .min_by_key(|&&p| (p.abs_diff(preferred), p))
            .expect("validated non-empty")
    }
}

/// How DRO weights act on training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DroMode {
    /// Datasets are drawn in proportion to their weights.
    Sampling,
    /// Datasets are drawn uniformly; each sample's loss is scaled by `n·w`.
    LossMultiplier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DroSettings {
    /// Steps between weight updates (one "epoch").
    pub update_every: usize,
    pub step_size: f64,
    pub smoothing: f64,
    /// Fixed windows per dataset on which the current loss is measured.
    pub probe_windows: usize,
    pub mode: DroMode,
    pub reference: ReferenceModel,
}

impl Default for DroSettings {
    fn default() -> Self {
        Self {
            update_every: 50,
            step_size: DEFAULT_STEP_SIZE,
            smoothing: DEFAULT_SMOOTHING,
            probe_windows: 8,
            mode: DroMode::Sampling,
            reference: ReferenceModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    /// Global gradient-norm clip.
    pub grad_clip: Option<f64>,
    pub dro: Option<DroSettings>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            batch_size: 16,
            grad_clip: Some(1.0),
            dro: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_shapes() {
        let bad = [
            ModelConfig {
                n_heads: 3,
                ..Default::default()
            },
            ModelConfig {
                top_k_experts: 5,
                ..Default::default()
            },
            ModelConfig {
                top_k_experts: 0,
                ..Default::default()
            },
            ModelConfig {
                patch_lengths: vec![],
                ..Default::default()
            },
            ModelConfig {
                patch_lengths: vec![8, 8],
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(
                matches!(cfg.validate(), Err(TsfmError::Config(_))),
                "{cfg:?}"
            );
        }
    }

    #[test]
    fn frequency_to_patch_map() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.patch_len_for(FreqClass::Minute), 16);
        assert_eq!(cfg.patch_len_for(FreqClass::Hour), 16);
        assert_eq!(cfg.patch_len_for(FreqClass::Day), 8);
        assert_eq!(cfg.patch_len_for(FreqClass::Quarter), 8);
        let single = ModelConfig {
            patch_lengths: vec![4],
            ..Default::default()
        };
        assert_eq!(single.patch_len_for(FreqClass::Hour), 4);
        let mut over = ModelConfig::default();
        over.scale_overrides.insert(FreqClass::Day, 16);
        assert_eq!(over.patch_len_for(FreqClass::Day), 16);
    }
}
