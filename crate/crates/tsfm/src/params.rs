//! Named parameter arrays, initialization and the versioned model file.

use std::collections::BTreeMap;
use std::path::Path;

use hybridcast_core::data::CALENDAR_DIM;
use hybridcast_core::rng::{derive_seed_str, rng_from_seed};
use hybridcast_core::FreqClass;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Result, TsfmError};
use crate::mat::Mat;

pub const FORMAT_VERSION: u32 = 1;
const N_FREQ: usize = FreqClass::ALL.len();

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ExpertIdx {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LayerIdx {
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub wq: usize,
    pub wk: usize,
    pub wv: usize,
    pub wo: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
    pub gate: usize,
    pub experts: Vec<ExpertIdx>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ScaleIdx {
    pub patch_len: usize,
    pub patch_w: usize,
    pub patch_b: usize,
    pub head_w: usize,
    pub head_b: usize,
}

/// Where each array lives in the flat parameter list, plus its name and shape.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub names: Vec<String>,
    pub shapes: Vec<(usize, usize)>,
    pub scales: Vec<ScaleIdx>,
    pub cal_w: usize,
    pub cal_b: usize,
    pub freq_table: usize,
    pub pos_table: Option<usize>,
    pub layers: Vec<LayerIdx>,
    pub lnf_g: usize,
    pub lnf_b: usize,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut names = Vec::new();
        let mut shapes = Vec::new();
        let mut add = |name: String, r: usize, c: usize| {
            names.push(name);
            shapes.push((r, c));
            names.len() - 1
        };
        let d = cfg.d_model;
        let scales = cfg
            .patch_lengths
            .iter()
            .map(|&p| ScaleIdx {
                patch_len: p,
                patch_w: add(format!("patch{p}.w"), 2 * p, d),
                patch_b: add(format!("patch{p}.b"), 1, d),
                head_w: add(format!("head{p}.w"), d, 3 * p),
                head_b: add(format!("head{p}.b"), 1, 3 * p),
            })
            .collect();
        let cal_w = add("calendar.w".into(), CALENDAR_DIM, d);
        let cal_b = add("calendar.b".into(), 1, d);
        let freq_table = add("frequency.table".into(), N_FREQ, d);
        let pos_table = cfg
            .positional_embedding
            .then(|| add("position.table".into(), cfg.context_patches, d));
        let layers = (0..cfg.n_layers)
            .map(|l| LayerIdx {
                ln1_g: add(format!("layer{l}.ln1.g"), 1, d),
                ln1_b: add(format!("layer{l}.ln1.b"), 1, d),
                wq: add(format!("layer{l}.attn.q"), d, d),
                wk: add(format!("layer{l}.attn.k"), d, d),
                wv: add(format!("layer{l}.attn.v"), d, d),
                wo: add(format!("layer{l}.attn.o"), d, d),
                ln2_g: add(format!("layer{l}.ln2.g"), 1, d),
                ln2_b: add(format!("layer{l}.ln2.b"), 1, d),
                gate: add(format!("layer{l}.gate.w"), d, cfg.n_experts),
                experts: (0..cfg.n_experts)
                    .map(|e| ExpertIdx {
                        w1: add(format!("layer{l}.expert{e}.w1"), d, cfg.d_ff),
                        b1: add(format!("layer{l}.expert{e}.b1"), 1, cfg.d_ff),
                        w2: add(format!("layer{l}.expert{e}.w2"), cfg.d_ff, d),
                        b2: add(format!("layer{l}.expert{e}.b2"), 1, d),
                    })
                    .collect(),
            })
            .collect();
        let lnf_g = add("final_ln.g".into(), 1, d);
        let lnf_b = add("final_ln.b".into(), 1, d);
        Self {
            names,
            shapes,
            scales,
            cal_w,
            cal_b,
            freq_table,
            pos_table,
            layers,
            lnf_g,
            lnf_b,
        }
    }

    pub fn scale(&self, patch_len: usize) -> Option<&ScaleIdx> {
        self.scales.iter().find(|s| s.patch_len == patch_len)
    }
}

/// All learned arrays of one model together with its config.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    config: ModelConfig,
    pub(crate) layout: Layout,
    pub(crate) tensors: Vec<Mat>,
}

enum Init {
    Zeros,
    Ones,
    Normal(f64),
    Const(Vec<f64>),
}

impl Params {
    /// Seeded initialization. Each array draws from its own stream keyed by
    /// its name, so adding arrays never perturbs the others.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config);
        let depth = (2.0 * config.n_layers as f64).sqrt();
        let raw_sigma_one = (std::f64::consts::E - 1.0).ln(); // softplus⁻¹(1)
        let tensors = layout
            .names
            .iter()
            .zip(&layout.shapes)
            .map(|(name, &(r, c))| {
                let fan_in = (r as f64).sqrt();
                let is_bias =
                    name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2");
                let init = if is_bias && name.starts_with("head") {
                    // ν block 0, μ block 0, σ block at softplus⁻¹(1).
                    let p = c / 3;
                    let mut b = vec![0.0; c];
                    b[2 * p..].iter_mut().for_each(|x| *x = raw_sigma_one);
                    Init::Const(b)
                } else if is_bias {
                    Init::Zeros
                } else if name.ends_with(".g") {
                    Init::Ones
                } else if name.starts_with("head") {
                    Init::Normal(0.1 / fan_in)
                } else if name.ends_with("attn.o") || name.ends_with(".w2") {
                    Init::Normal(1.0 / (fan_in * depth))
                } else if name.ends_with(".table") {
                    Init::Normal(0.1)
                } else {
                    Init::Normal(1.0 / fan_in)
                };
                let data = match init {
                    Init::Zeros => vec![0.0; r * c],
                    Init::Ones => vec![1.0; r * c],
                    Init::Const(v) => v,
                    Init::Normal(std) => {
                        let mut rng = rng_from_seed(derive_seed_str(config.seed, name));
                        let dist = Normal::new(0.0, std).expect("positive std");
                        (0..r * c).map(|_| dist.sample(&mut rng)).collect()
                    }
                };
                Mat::from_vec(r, c, data)
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            layout,
            tensors,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn names(&self) -> &[String] {
        &self.layout.names
    }

    pub fn arrays(&self) -> &[Mat] {
        &self.tensors
    }

    pub fn arrays_mut(&mut self) -> &mut [Mat] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Mat> {
        self.index_of(name).map(|i| &mut self.tensors[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.layout.names.iter().position(|n| n == name)
    }

    pub fn n_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    /// Replaces the optimizer constants (they do not affect the arrays).
    pub fn set_optimizer(&mut self, opt: hybridcast_core::optim::AdamConfig) {
        self.config.optimizer = opt;
    }

    /// Copies expert 0 of every layer over the others.
    pub fn tie_experts(&mut self) {
        for layer in self.layout.layers.clone() {
            let first = layer.experts[0].clone();
            for e in &layer.experts[1..] {
                for (src, dst) in [
                    (first.w1, e.w1),
                    (first.b1, e.b1),
                    (first.w2, e.w2),
                    (first.b2, e.b2),
                ] {
                    self.tensors[dst] = self.tensors[src].clone();
                }
            }
        }
    }

    /// Sets every gate weight to zero.
    pub fn zero_gates(&mut self) {
        for layer in self.layout.layers.clone() {
            self.tensors[layer.gate]
                .data
                .iter_mut()
                .for_each(|x| *x = 0.0);
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.tensors.iter().position(|t| !t.is_finite()) {
            Some(i) => Err(TsfmError::NonFinite {
                what: "parameter",
                location: self.layout.names[i].clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        let arrays = self
            .layout
            .names
            .iter()
            .zip(&self.tensors)
            .map(|(n, t)| {
                (
                    n.clone(),
                    ArrayFile {
                        shape: vec![t.rows, t.cols],
                        values: t.data.clone(),
                    },
                )
            })
            .collect();
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            arrays,
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let format_err = |message: String| TsfmError::Format {
            path: path.to_path_buf(),
            message,
        };
        let header: VersionOnly =
            serde_json::from_str(text).map_err(|e| format_err(e.to_string()))?;
        if header.format_version != FORMAT_VERSION {
            return Err(TsfmError::Version {
                found: header.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_str(text).map_err(|e| format_err(e.to_string()))?;
        file.config.validate()?;
        let layout = Layout::new(&file.config);
        let mut arrays = file.arrays;
        let mut tensors = Vec::with_capacity(layout.names.len());
        for (name, &(r, c)) in layout.names.iter().zip(&layout.shapes) {
            let shape_err = |reason: String| TsfmError::Shape {
                name: name.clone(),
                reason,
            };
            let a = arrays
                .remove(name)
                .ok_or_else(|| shape_err("missing".into()))?;
            if a.shape != [r, c] {
                return Err(shape_err(format!(
                    "shape {:?}, config implies [{r}, {c}]",
                    a.shape
                )));
            }
            if a.values.len() != r * c {
                return Err(shape_err(format!(
                    "{} values for shape [{r}, {c}]",
                    a.values.len()
                )));
            }
            if a.values.iter().any(|v| !v.is_finite()) {
                return Err(shape_err("non-finite value".into()));
            }
            tensors.push(Mat::from_vec(r, c, a.values));
        }
        if let Some(extra) = arrays.keys().next() {
            return Err(TsfmError::Shape {
                name: extra.clone(),
                reason: "not part of the configured model".into(),
            });
        }
        Ok(Self {
            config: file.config,
            layout,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| TsfmError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| TsfmError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_json(&text, path)
    }
}

#[derive(Serialize, Deserialize)]
struct ArrayFile {
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    config: ModelConfig,
    arrays: BTreeMap<String, ArrayFile>,
}

#[derive(Deserialize)]
struct VersionOnly {
    format_version: u32,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_names_are_unique_and_shapes_follow_config() {
        let cfg = ModelConfig {
            positional_embedding: true,
            ..Default::default()
        };
        let p = Params::init(&cfg).unwrap();
        let mut names = p.names().to_vec();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), p.names().len());
        assert_eq!(p.get("patch16.w").unwrap().shape(), (32, 64));
        assert_eq!(p.get("head8.w").unwrap().shape(), (64, 24));
        assert_eq!(p.get("layer1.expert3.w2").unwrap().shape(), (128, 64));
        assert_eq!(p.get("position.table").unwrap().shape(), (8, 64));
        p.check_finite().unwrap();
    }

    #[test]
    fn init_is_seeded() {
        let a = Params::init(&ModelConfig::default()).unwrap();
        let b = Params::init(&ModelConfig::default()).unwrap();
        let c = Params::init(&ModelConfig {
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(a, b);
        assert_ne!(a.tensors, c.tensors);
    }
}
