//! End-to-end run: ingest, augment, train, forecast, fuse, coordinate and
//! evaluate, with every artifact written under one run directory.
//!
//! Stage seeds are `derive_seed_str(seed, stage)`, so a stage's randomness
//! does not depend on which other stages ran before it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hybridcast_core::augment::{
    dba_augment, frequency_aggregate, mbb_augment, mixup_augment, AggregateMode,
};
use hybridcast_core::baselines::LinearArModel;
use hybridcast_core::eval::{rolling_benchmark, BenchConfig};
use hybridcast_core::linalg::{lstsq, Design};
use hybridcast_core::rng::{derive_seed, derive_seed_str};
use hybridcast_core::simulate::{generate, NoiseSpec, SeasonSpec, SyntheticSpec, TrendSpec};
use hybridcast_core::{Forecaster, FreqClass, TimeSeries};
use hybridcast_fusion::{CoordinationConfig, RouterConfig};
use hybridcast_tsfm::{DroSettings, ModelConfig, TrainConfig, TsfmForecaster};
use log::info;
use serde::{Deserialize, Serialize};

use crate::commands::{
    fit_fusion, forecast_rows, run_coordination, run_training, FusionRequest, TrainingLog,
};
use crate::error::{CliError, Result};
use crate::io::{
    ensure_dir, read_datasets, resolve, write_json, write_jsonl, write_text, Datasets,
};
use crate::models::{Cascade, EmbedderKind, Fused, FusionMode, MemberKind, MemberSpec, PoolSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub augment: Vec<AugmentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dro: Option<DroSettings>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub fusion: FusionSettings,
    #[serde(default)]
    pub coordination: CoordinationSettings,
    #[serde(default)]
    pub evaluation: EvalSettings,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Files or directories of real data, relative to the config file.
    pub paths: Vec<PathBuf>,
    pub simulate: Vec<SimulatedDataset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatedDataset {
    pub name: String,
    #[serde(default = "one")]
    pub count: usize,
    pub spec: SyntheticSpec,
}

fn one() -> usize {
    1
}

/// One augmentation applied to the training part of every real and
/// simulated dataset; mixup draws across all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum AugmentSpec {
    Freq {
        factor: usize,
        #[serde(default = "mean_mode")]
        aggregate: AggregateMode,
    },
    Mbb {
        #[serde(default)]
        period: Option<usize>,
        block_len: usize,
        variants: usize,
    },
    Dba {
        k: usize,
        per_cluster: usize,
    },
    Mixup {
        m: usize,
        #[serde(default = "unit")]
        alpha: f64,
        variants: usize,
    },
}

fn mean_mode() -> AggregateMode {
    AggregateMode::Mean
}

fn unit() -> f64 {
    1.0
}

impl AugmentSpec {
    fn tag(&self) -> &'static str {
        match self {
            AugmentSpec::Freq { .. } => "freq",
            AugmentSpec::Mbb { .. } => "mbb",
            AugmentSpec::Dba { .. } => "dba",
            AugmentSpec::Mixup { .. } => "mixup",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub steps: usize,
    pub batch_size: usize,
    pub grad_clip: Option<f64>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            steps: t.steps,
            batch_size: t.batch_size,
            grad_clip: t.grad_clip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSettings {
    /// Pool members; a `tsfm` member without `model` uses the trained model.
    pub members: Vec<MemberSpec>,
    pub mode: FusionMode,
    pub embedder: Option<EmbedderKind>,
    pub router: RouterConfig,
    /// Rolling training windows per series.
    pub origins: usize,
}

impl Default for FusionSettings {
    fn default() -> Self {
        Self {
            members: [
                MemberKind::SeasonalNaive,
                MemberKind::Ses,
                MemberKind::Ar,
                MemberKind::Tsfm,
            ]
            .into_iter()
            .map(MemberSpec::of)
            .collect(),
            mode: FusionMode::Router,
            embedder: None,
            router: RouterConfig::default(),
            origins: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoordinationSettings {
    pub config: CoordinationConfig,
    /// Order of the small AR model s1.
    pub s1_order: usize,
    /// Dataset the cascade is built for; the first one when absent.
    pub dataset: Option<String>,
    pub origins: usize,
}

impl Default for CoordinationSettings {
    fn default() -> Self {
        Self {
            config: CoordinationConfig::default(),
            s1_order: 4,
            dataset: None,
            origins: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub horizon: usize,
    pub origins: usize,
    pub stride: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            horizon: 12,
            origins: 4,
            stride: 1,
        }
    }
}

impl EvalSettings {
    fn bench(&self) -> BenchConfig {
        BenchConfig {
            stride: self.stride,
            ..BenchConfig::new(self.horizon, self.origins)
        }
    }

    /// Points at the end of each series kept out of training.
    pub fn holdout(&self) -> usize {
        self.horizon + self.origins.saturating_sub(1) * self.stride
    }
}

impl PipelineConfig {
    /// Three simulated monthly datasets, one augmentation of each kind and
    /// the default desk-scale model.
    pub fn example() -> Self {
        let season = |period, amplitude| Some(SeasonSpec::cosine(period, amplitude, 0.0));
        let monthly = |mut s: SyntheticSpec| {
            s.freq = FreqClass::Month;
            s
        };
        let sim = |name: &str, spec: SyntheticSpec| SimulatedDataset {
            name: name.into(),
            count: 4,
            spec,
        };
        Self {
            seed: 7,
            data: DataConfig {
                paths: Vec::new(),
                simulate: vec![
                    sim(
                        "trend_season",
                        monthly(SyntheticSpec::new(
                            144,
                            TrendSpec::linear(0.5, 100.0),
                            season(12, 10.0),
                            NoiseSpec::gaussian(1.0),
                        )),
                    ),
                    sim(
                        "flat_season",
                        monthly(SyntheticSpec::new(
                            144,
                            TrendSpec::linear(0.0, 50.0),
                            season(12, 5.0),
                            NoiseSpec::gaussian(0.5),
                        )),
                    ),
                    sim(
                        "growth",
                        monthly(SyntheticSpec::new(
                            144,
                            TrendSpec::linear(1.0, 20.0),
                            None,
                            NoiseSpec::gaussian(1.0),
                        )),
                    ),
                ],
            },
            augment: vec![
                AugmentSpec::Mbb {
                    period: None,
                    block_len: 12,
                    variants: 1,
                },
                AugmentSpec::Mixup {
                    m: 2,
                    alpha: 1.0,
                    variants: 4,
                },
            ],
            dro: Some(DroSettings::default()),
            model: ModelConfig::default(),
            train: TrainSettings {
                steps: 300,
                ..TrainSettings::default()
            },
            fusion: FusionSettings::default(),
            coordination: CoordinationSettings::default(),
            evaluation: EvalSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(CliError::Usage(m));
        self.model.validate()?;
        if self.data.paths.is_empty() && self.data.simulate.is_empty() {
            return usage("data: give at least one path or simulated dataset".into());
        }
        for s in &self.data.simulate {
            if s.count == 0 {
                return usage(format!(
                    "data.simulate `{}`: count must be at least 1",
                    s.name
                ));
            }
            s.spec.validate()?;
        }
        if self.train.batch_size == 0 {
            return usage("train.batch_size must be at least 1".into());
        }
        let e = &self.evaluation;
        if e.horizon == 0 || e.origins == 0 || e.stride == 0 {
            return usage("evaluation: horizon, origins and stride must be at least 1".into());
        }
        if self.fusion.members.is_empty() {
            return usage("fusion.members must not be empty".into());
        }
        if self.fusion.origins == 0 || self.coordination.origins == 0 {
            return usage("fusion.origins and coordination.origins must be at least 1".into());
        }
        if self.coordination.s1_order == 0 {
            return usage("coordination.s1_order must be at least 1".into());
        }
        self.coordination.config.validate()?;
        Ok(())
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            steps: self.train.steps,
            batch_size: self.train.batch_size,
            grad_clip: self.train.grad_clip,
            dro: self.dro.clone(),
        }
    }
}

/// Provenance classes of the inventory table.
const REAL: &str = "real";
const SIMULATED: &str = "simulation_augmentation";
const MIXUP: &str = "mixup";

struct Dataset {
    name: String,
    provenance: &'static str,
    series: Vec<TimeSeries>,
}

/// Accumulates artifacts and the stage log.
struct Run {
    dir: PathBuf,
    artifacts: Vec<(String, PathBuf)>,
    stages: Vec<String>,
    log: String,
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, stage: &str, name: &str) {
        self.artifacts.push((stage.to_string(), self.path(name)));
    }

    fn note(&mut self, stage: &str, msg: impl AsRef<str>) {
        info!("[{stage}] {}", msg.as_ref());
        let _ = writeln!(self.log, "[{stage}] {}", msg.as_ref());
    }

    fn completed(&self) -> Vec<PathBuf> {
        self.artifacts.iter().map(|(_, p)| p.clone()).collect()
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Run) -> Result<T>) -> Result<T> {
        let out = f(self).map_err(|e| CliError::Stage {
            stage: name.to_string(),
            completed: self.completed(),
            source: Box::new(e),
        })?;
        self.stages.push(name.to_string());
        Ok(out)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    seed: u64,
    stages: Vec<&'a str>,
    artifacts: BTreeMap<&'a str, Vec<String>>,
}

/// Runs every stage; `base` resolves relative data paths. Returns the
/// written artifact paths.
pub fn run_pipeline(cfg: &PipelineConfig, base: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    ensure_dir(out)?;
    let mut run = Run {
        dir: out.to_path_buf(),
        artifacts: Vec::new(),
        stages: Vec::new(),
        log: String::new(),
    };
    run.stage("config", |r| {
        write_json(&r.path("config.resolved.json"), cfg)?;
        r.record("config", "config.resolved.json");
        Ok(())
    })?;
    let holdout = cfg.evaluation.holdout();

    let base_sets = run.stage("ingest", |r| ingest(cfg, base, r))?;
    let train_sets: Vec<Dataset> = base_sets
        .iter()
        .map(|d| Dataset {
            name: d.name.clone(),
            provenance: d.provenance,
            series: training_parts(&d.series, holdout),
        })
        .collect();
    for d in &train_sets {
        if d.series.is_empty() {
            return Err(CliError::Stage {
                stage: "ingest".into(),
                completed: run.completed(),
                source: Box::new(CliError::Data(format!(
                    "dataset `{}`: no series longer than the {holdout}-point evaluation holdout",
                    d.name
                ))),
            });
        }
    }

    let augmented = run.stage("augment", |r| augment(cfg, &train_sets, r))?;
    run.stage("inventory", |r| {
        let all: Vec<&Dataset> = base_sets.iter().chain(&augmented).collect();
        write_text(&r.path("inventory.csv"), &inventory(&all))?;
        r.record("inventory", "inventory.csv");
        Ok(())
    })?;

    let training: BTreeMap<String, Vec<TimeSeries>> = train_sets
        .iter()
        .chain(&augmented)
        .map(|d| (d.name.clone(), d.series.clone()))
        .collect();
    let mut model_cfg = cfg.model.clone();
    model_cfg.seed = derive_seed_str(cfg.seed, "train");
    let tc = cfg.train_config();
    let params = run.stage("train", |r| {
        let outcome = run_training(&model_cfg, &tc, &training, &r.path("checkpoint.json"))
            .inspect_err(|e| {
                if let CliError::Numeric {
                    checkpoint: Some(_),
                    ..
                } = e
                {
                    r.record("train", "checkpoint.json");
                }
            })?;
        outcome.params.save(&r.path("model.json"))?;
        r.record("train", "model.json");
        let log = TrainingLog::new(&outcome, &tc);
        write_json(&r.path("training.json"), &log)?;
        r.record("train", "training.json");
        #[derive(Serialize)]
        struct Weights<'a> {
            weights: BTreeMap<String, f64>,
            trajectory: &'a [crate::commands::WeightsPoint],
        }
        write_json(
            &r.path("dro_weights.json"),
            &Weights {
                weights: log.final_weights(),
                trajectory: &log.trajectory,
            },
        )?;
        r.record("train", "dro_weights.json");
        let last = outcome.losses.last().copied().unwrap_or(f64::NAN);
        r.note(
            "train",
            format!("{} steps, final batch loss {last:.6}", outcome.losses.len()),
        );
        Ok(outcome.params)
    })?;

    let eval_sets: Datasets = base_sets
        .iter()
        .map(|d| (d.name.clone(), d.series.clone()))
        .collect();
    let train_eval: Datasets = train_sets
        .iter()
        .map(|d| (d.name.clone(), d.series.clone()))
        .collect();
    let h = cfg.evaluation.horizon;

    run.stage("forecast", |r| {
        let series: Vec<TimeSeries> = train_sets
            .iter()
            .flat_map(|d| d.series.iter().cloned())
            .collect();
        write_jsonl(
            &r.path("forecasts.jsonl"),
            &forecast_rows(&params, &series, h)?,
        )?;
        r.record("forecast", "forecasts.jsonl");
        r.note("forecast", format!("{} series, horizon {h}", series.len()));
        Ok(())
    })?;

    let mut pool = PoolSpec {
        members: cfg.fusion.members.clone(),
    };
    for m in &mut pool.members {
        if m.kind == MemberKind::Tsfm && m.model.is_none() {
            m.model = Some(PathBuf::from("model.json"));
        }
    }
    let fused = run.stage("fusion", |r| {
        let mut router = cfg.fusion.router.clone();
        router.seed = derive_seed_str(cfg.seed, "fusion");
        let req = FusionRequest {
            pool: &pool,
            base: &r.dir,
            mode: cfg.fusion.mode,
            embedder: cfg.fusion.embedder,
            router: &router,
            bench: BenchConfig::new(h, cfg.fusion.origins),
        };
        let file = fit_fusion(&req, &train_eval, &r.dir)?;
        write_json(&r.path("fusion.json"), &file)?;
        r.record("fusion", "fusion.json");
        r.note(
            "fusion",
            format!(
                "{:?} over {}",
                cfg.fusion.mode,
                pool_names(&pool).join(", ")
            ),
        );
        Fused::from_file(&file, &r.dir)
    })?;

    let (cascade, cascade_set) = run.stage("coordinate", |r| {
        let c = &cfg.coordination;
        let chosen = match &c.dataset {
            Some(name) => train_sets.iter().find(|d| &d.name == name).ok_or_else(|| {
                CliError::Usage(format!("coordination.dataset: no dataset named `{name}`"))
            })?,
            None => &train_sets[0],
        };
        let s1 = pooled_ar_fit(&chosen.series, c.s1_order)?;
        write_json(&r.path("s1.json"), &s1)?;
        r.record("coordinate", "s1.json");
        let large: Arc<dyn Forecaster> = Arc::new(TsfmForecaster::named(params.clone(), "tsfm"));
        let run_c = run_coordination(
            &s1,
            large.as_ref(),
            &chosen.series,
            &c.config,
            &BenchConfig::new(h, c.origins),
            derive_seed_str(cfg.seed, "coordinate"),
        )?;
        write_json(&r.path("s2.json"), &run_c.s2)?;
        r.record("coordinate", "s2.json");
        write_json(&r.path("coordination.json"), &run_c.summary)?;
        r.record("coordinate", "coordination.json");
        r.note(
            "coordinate",
            format!(
                "dataset {}: {} easy, {} hard, {} challenging samples",
                chosen.name, run_c.summary.easy, run_c.summary.hard, run_c.summary.challenging
            ),
        );
        if let Some(n) = &run_c.summary.notice {
            r.note("coordinate", n);
        }
        let cascade = Cascade {
            s1,
            s2: run_c.s2,
            large,
            cfg: c.config.clone(),
        };
        Ok((cascade, chosen.name.clone()))
    })?;

    run.stage("evaluate", |r| {
        let average = Fused::average("fused_average", Arc::new(pool.build(&r.dir)?));
        let mut models: Vec<&dyn Forecaster> = fused
            .pool()
            .members()
            .iter()
            .map(|m| m.forecaster.as_ref())
            .collect();
        models.push(&fused);
        if cfg.fusion.mode != FusionMode::Average {
            models.push(&average);
        }
        let bench = cfg.evaluation.bench();
        let mut report = rolling_benchmark(&models, &eval_sets, &bench)?;
        // The cascade is fitted for one dataset and is scored on it alone.
        let own: Datasets = eval_sets
            .iter()
            .filter(|(n, _)| *n == cascade_set)
            .cloned()
            .collect();
        report
            .rows
            .extend(rolling_benchmark(&[&cascade], &own, &bench)?.rows);
        write_text(&r.path("report.csv"), &report.to_csv()?)?;
        r.record("evaluate", "report.csv");
        write_json(&r.path("report.json"), &report)?;
        r.record("evaluate", "report.json");
        r.note(
            "evaluate",
            format!(
                "{} models on {} datasets, cascade on {cascade_set}",
                models.len(),
                eval_sets.len()
            ),
        );
        Ok(())
    })?;

    let mut artifacts: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (s, p) in &run.artifacts {
        let rel = p.strip_prefix(&run.dir).unwrap_or(p);
        artifacts
            .entry(s.as_str())
            .or_default()
            .push(rel.display().to_string());
    }
    write_json(
        &run.path("run.json"),
        &Manifest {
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            stages: run.stages.iter().map(String::as_str).collect(),
            artifacts,
        },
    )?;
    write_text(&run.path("stages.log"), &run.log)?;
    let mut done = run.completed();
    done.push(run.path("run.json"));
    done.push(run.path("stages.log"));
    Ok(done)
}

fn pool_names(pool: &PoolSpec) -> Vec<String> {
    pool.members.iter().map(MemberSpec::name).collect()
}

fn ingest(cfg: &PipelineConfig, base: &Path, run: &mut Run) -> Result<Vec<Dataset>> {
    let mut out: Vec<Dataset> = Vec::new();
    for p in &cfg.data.paths {
        for (name, series) in read_datasets(&resolve(base, p))? {
            out.push(Dataset {
                name,
                provenance: REAL,
                series,
            });
        }
    }
    for sim in &cfg.data.simulate {
        let seed = derive_seed_str(cfg.seed, &format!("simulate/{}", sim.name));
        let series = (0..sim.count)
            .map(|i| {
                let mut spec = sim.spec.clone();
                spec.id = format!("{}-{i}", sim.name);
                generate(&spec, derive_seed(seed, i as u64))
            })
            .collect::<hybridcast_core::Result<Vec<_>>>()?;
        out.push(Dataset {
            name: sim.name.clone(),
            provenance: SIMULATED,
            series,
        });
    }
    let mut names = BTreeSet::new();
    for d in &out {
        if !names.insert(d.name.as_str()) {
            return Err(CliError::Usage(format!(
                "two datasets are named `{}`",
                d.name
            )));
        }
        if d.series.is_empty() {
            return Err(CliError::Data(format!(
                "dataset `{}` has no series",
                d.name
            )));
        }
        run.note(
            "ingest",
            format!("{} ({}): {} series", d.name, d.provenance, d.series.len()),
        );
    }
    Ok(out)
}

fn training_parts(series: &[TimeSeries], holdout: usize) -> Vec<TimeSeries> {
    series
        .iter()
        .filter(|s| s.len() > holdout)
        .map(|s| {
            s.with_values(s.id.clone(), s.values()[..s.len() - holdout].to_vec())
                .expect("non-empty prefix")
        })
        .collect()
}

fn augment(cfg: &PipelineConfig, sets: &[Dataset], run: &mut Run) -> Result<Vec<Dataset>> {
    let mut out = Vec::new();
    for (i, spec) in cfg.augment.iter().enumerate() {
        let seed = derive_seed_str(cfg.seed, &format!("augment/{i}/{}", spec.tag()));
        if let AugmentSpec::Mixup { m, alpha, variants } = spec {
            let pooled: Vec<TimeSeries> =
                sets.iter().flat_map(|d| d.series.iter().cloned()).collect();
            let series = mixup_augment(&pooled, *m, *alpha, *variants, seed)?;
            out.push(Dataset {
                name: format!("mixup_{i}"),
                provenance: MIXUP,
                series,
            });
            continue;
        }
        for (j, d) in sets.iter().enumerate() {
            let ds_seed = derive_seed(seed, j as u64);
            let series = match spec {
                AugmentSpec::Freq { factor, aggregate } => d
                    .series
                    .iter()
                    .map(|s| frequency_aggregate(s, *factor, *aggregate))
                    .collect::<hybridcast_core::Result<Vec<_>>>()?,
                AugmentSpec::Mbb {
                    period,
                    block_len,
                    variants,
                } => {
                    let mut v = Vec::new();
                    for (k, s) in d.series.iter().enumerate() {
                        let p = period.unwrap_or(s.freq.period());
                        v.extend(mbb_augment(
                            s,
                            p,
                            *block_len,
                            *variants,
                            derive_seed(ds_seed, k as u64),
                        )?);
                    }
                    v
                }
                AugmentSpec::Dba { k, per_cluster } => {
                    dba_augment(&d.series, *k, *per_cluster, ds_seed)?
                }
                AugmentSpec::Mixup { .. } => unreachable!("handled above"),
            };
            out.push(Dataset {
                name: format!("{}_{}", d.name, spec.tag()),
                provenance: SIMULATED,
                series,
            });
        }
    }
    for d in &out {
        run.note("augment", format!("{}: {} series", d.name, d.series.len()));
    }
    Ok(out)
}

/// Datasets, entries (series) and points per provenance class plus a total.
fn inventory(sets: &[&Dataset]) -> String {
    let mut csv = String::from("provenance,datasets,entries,points\n");
    let mut total = (0, 0, 0);
    for class in [REAL, SIMULATED, MIXUP] {
        let of: Vec<&&Dataset> = sets.iter().filter(|d| d.provenance == class).collect();
        let entries: usize = of.iter().map(|d| d.series.len()).sum();
        let points: usize = of.iter().flat_map(|d| &d.series).map(TimeSeries::len).sum();
        let _ = writeln!(csv, "{class},{},{entries},{points}", of.len());
        total = (total.0 + of.len(), total.1 + entries, total.2 + points);
    }
    let _ = writeln!(csv, "total,{},{},{}", total.0, total.1, total.2);
    csv
}

/// AR(p) least squares over the lag rows of every series together.
pub fn pooled_ar_fit(series: &[TimeSeries], p: usize) -> Result<LinearArModel> {
    let mut x = Design::new(p + 1);
    let mut y = Vec::new();
    let mut row = vec![1.0; p + 1];
    for s in series {
        let v = s.values();
        for t in p..v.len() {
            for i in 0..p {
                row[i + 1] = v[t - 1 - i];
            }
            x.push_row(&row);
            y.push(v[t]);
        }
    }
    if y.len() < p + 1 {
        return Err(CliError::Data(format!(
            "s1: {} lag rows cannot identify an AR({p}) model",
            y.len()
        )));
    }
    let sol = lstsq(&x, &y)?;
    let fitted = x.mul_vec(&sol.coef);
    let sse: f64 = fitted.iter().zip(&y).map(|(f, t)| (t - f).powi(2)).sum();
    Ok(LinearArModel {
        order: p,
        intercept: sol.coef[0],
        coef: sol.coef[1..].to_vec(),
        residual_std: (sse / y.len() as f64).sqrt(),
        differenced: false,
        ridged: sol.ridged,
    })
}

pub fn run_pipeline_cmd(a: &crate::args::RunPipelineArgs) -> Result<()> {
    let out = a.common.output()?;
    let (mut cfg, base) = match &a.common.config {
        Some(p) => (
            crate::io::read_config::<PipelineConfig>(p)?,
            crate::io::parent_dir(p),
        ),
        None => (PipelineConfig::example(), PathBuf::from(".")),
    };
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    let done = run_pipeline(&cfg, &base, out)?;
    info!(
        "run complete: {} artifacts in {}",
        done.len(),
        out.display()
    );
    Ok(())
}
