//! One function per subcommand.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hybridcast_core::augment::{
    dba_augment, frequency_aggregate, mbb_augment, mixup_augment, AggregateMode,
};
use hybridcast_core::baselines::{baseline_confidence, LinearArModel};
use hybridcast_core::data::{format_timestamp, to_jsonl};
use hybridcast_core::decomp::{stl_values, StlConfig};
use hybridcast_core::eval::{fa, rolling_benchmark, skill_report, BenchConfig};
use hybridcast_core::rng::derive_seed;
use hybridcast_core::simulate::{generate, skill_suite, SyntheticSpec};
use hybridcast_core::stats::StudentT;
use hybridcast_core::{Forecaster, TimeSeries};
use hybridcast_fusion::{
    coordinate_infer, coordinate_train, fit_linear_fusion, train_router, CoordinationConfig, Route,
    RouterConfig,
};
use hybridcast_tsfm::{
    forecast, train_observed, ModelConfig, Params, TrainConfig, TrainOutcome, TsfmError,
};
use log::info;
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::error::{CliError, Result};
use crate::io::*;
use crate::models::*;

impl Common {
    pub fn output(&self) -> Result<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| CliError::Usage("--output is required for this command".into()))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let out = a.common.output()?;
    let seed = a.common.seed();
    let series: Vec<TimeSeries> = if a.skill_suite {
        skill_suite(seed)?
            .into_iter()
            .flat_map(|s| s.series)
            .collect()
    } else {
        let path = a
            .spec
            .as_deref()
            .or(a.common.config.as_deref())
            .ok_or_else(|| CliError::Usage("simulate needs --spec or --skill-suite".into()))?;
        let value: serde_json::Value = read_config(path)?;
        let specs: Vec<SyntheticSpec> = if value.is_array() {
            serde_json::from_value(value)
        } else {
            serde_json::from_value(value).map(|s| vec![s])
        }
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if a.count == 0 {
            return Err(CliError::Usage("--count must be at least 1".into()));
        }
        let mut out = Vec::new();
        for spec in &specs {
            for i in 0..a.count {
                let mut s = spec.clone();
                if a.count > 1 {
                    s.id = format!("{}-{i}", spec.id);
                }
                out.push(generate(&s, derive_seed(seed, out.len() as u64))?);
            }
        }
        out
    };
    write_text(out, &to_jsonl(&series))?;
    info!("wrote {} series to {}", series.len(), out.display());
    Ok(())
}

pub fn augment(a: &AugmentArgs) -> Result<()> {
    let out = a.common.output()?;
    let seed = a.common.seed();
    let input = read_series(&a.input)?;
    let produced: Vec<TimeSeries> = match a.strategy {
        Strategy::Freq => {
            let mode = match a.aggregate {
                AggregateArg::Mean => AggregateMode::Mean,
                AggregateArg::Sum => AggregateMode::Sum,
            };
            input
                .iter()
                .map(|s| frequency_aggregate(s, a.factor, mode))
                .collect::<hybridcast_core::Result<_>>()?
        }
        Strategy::Mbb => {
            let mut out = Vec::new();
            for (i, s) in input.iter().enumerate() {
                let period = a.period.unwrap_or(s.freq.period());
                out.extend(mbb_augment(
                    s,
                    period,
                    a.block_len,
                    a.variants,
                    derive_seed(seed, i as u64),
                )?);
            }
            out
        }
        Strategy::Dba => dba_augment(&input, a.k, a.variants, seed)?,
        Strategy::Mixup => mixup_augment(&input, a.m, a.alpha, a.variants, seed)?,
    };
    write_text(out, &to_jsonl(&produced))?;
    info!(
        "wrote {} augmented series to {}",
        produced.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct DecompRow<'a> {
    id: &'a str,
    period: usize,
    trend: Vec<f64>,
    seasonal: Vec<f64>,
    residual: Vec<f64>,
}

pub fn decompose(a: &DecomposeArgs) -> Result<()> {
    let out = a.common.output()?;
    let input = read_series(&a.input)?;
    let rows = input
        .iter()
        .map(|s| {
            let period = a.period.unwrap_or(s.freq.period());
            let d = stl_values(s.values(), period, &StlConfig::default())
                .map_err(|e| CliError::from(e).with_context(&s.id))?;
            Ok(DecompRow {
                id: &s.id,
                period,
                trend: d.trend,
                seasonal: d.seasonal,
                residual: d.residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_jsonl(out, &rows)
}

impl CliError {
    fn with_context(self, what: &str) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{what}: {m}")),
            CliError::Numeric {
                message,
                checkpoint,
            } => CliError::Numeric {
                message: format!("{what}: {message}"),
                checkpoint,
            },
            other => other,
        }
    }
}

/// Transformer training settings (`--config` of train-tsfm and dro-weights).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsfmRunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

fn tsfm_run_config(common: &Common) -> Result<TsfmRunConfig> {
    let mut cfg: TsfmRunConfig = match &common.config {
        Some(p) => read_config(p)?,
        None => TsfmRunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.model.seed = seed;
    }
    cfg.model.validate()?;
    Ok(cfg)
}

fn to_map(datasets: Datasets) -> BTreeMap<String, Vec<TimeSeries>> {
    datasets.into_iter().collect()
}

/// Trains from scratch. On divergence the last good parameters are saved to
/// `checkpoint` and the error names that path.
pub fn run_training(
    model: &ModelConfig,
    tc: &TrainConfig,
    datasets: &BTreeMap<String, Vec<TimeSeries>>,
    checkpoint: &Path,
) -> Result<TrainOutcome> {
    let params = Params::init(model)?;
    let mut last_log = 0;
    let total = tc.steps;
    let result = train_observed(params, tc, datasets, |step, _, loss| {
        if step + 1 == total || step >= last_log + 100 {
            last_log = step;
            info!("step {}/{total}: loss {loss:.5}", step + 1);
        }
    });
    match result {
        Ok(o) => Ok(o),
        Err(TsfmError::Diverged {
            step,
            reason,
            checkpoint: params,
        }) => {
            ensure_dir(&parent_dir(checkpoint))?;
            params.save(checkpoint)?;
            Err(CliError::Numeric {
                message: format!("training diverged at step {step}: {reason}"),
                checkpoint: Some(checkpoint.to_path_buf()),
            })
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Serialize)]
pub struct WeightsPoint {
    pub update: usize,
    pub step: usize,
    pub weights: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct TrainingLog {
    pub steps: usize,
    pub losses: Vec<f64>,
    pub reference: BTreeMap<String, f64>,
    pub trajectory: Vec<WeightsPoint>,
    pub probe_losses: Vec<BTreeMap<String, f64>>,
}

impl TrainingLog {
    pub fn new(o: &TrainOutcome, tc: &TrainConfig) -> Self {
        let every = tc.dro.as_ref().map_or(0, |d| d.update_every);
        Self {
            steps: o.losses.len(),
            losses: o.losses.clone(),
            reference: o.reference.clone(),
            trajectory: o
                .weights
                .iter()
                .enumerate()
                .map(|(i, w)| WeightsPoint {
                    update: i,
                    step: i * every,
                    weights: w.as_map(),
                })
                .collect(),
            probe_losses: o.probe_losses.clone(),
        }
    }

    pub fn final_weights(&self) -> BTreeMap<String, f64> {
        self.trajectory
            .last()
            .map(|p| p.weights.clone())
            .unwrap_or_default()
    }
}

pub fn dro_weights(a: &DroWeightsArgs) -> Result<()> {
    let out = a.common.output()?;
    let mut cfg = tsfm_run_config(&a.common)?;
    cfg.train.steps = a.steps;
    let mut dro = cfg.train.dro.take().unwrap_or_default();
    if let Some(n) = a.update_every {
        dro.update_every = n;
    }
    cfg.train.dro = Some(dro);
    let datasets = to_map(read_datasets(&a.datasets)?);
    let outcome = run_training(
        &cfg.model,
        &cfg.train,
        &datasets,
        &sibling(out, ".checkpoint.json"),
    )?;
    let log = TrainingLog::new(&outcome, &cfg.train);
    #[derive(Serialize)]
    struct WeightsFile<'a> {
        weights: BTreeMap<String, f64>,
        reference: &'a BTreeMap<String, f64>,
        trajectory: &'a [WeightsPoint],
        probe_losses: &'a [BTreeMap<String, f64>],
    }
    write_json(
        out,
        &WeightsFile {
            weights: log.final_weights(),
            reference: &log.reference,
            trajectory: &log.trajectory,
            probe_losses: &log.probe_losses,
        },
    )
}

pub fn train_tsfm(a: &TrainTsfmArgs) -> Result<()> {
    let out = a.common.output()?;
    let mut cfg = tsfm_run_config(&a.common)?;
    if let Some(s) = a.steps {
        cfg.train.steps = s;
    }
    if a.dro && cfg.train.dro.is_none() {
        cfg.train.dro = Some(Default::default());
    }
    let datasets = to_map(read_datasets(&a.data)?);
    info!(
        "training on {} datasets: {}",
        datasets.len(),
        serde_json::to_string(&cfg).unwrap_or_default()
    );
    let outcome = run_training(
        &cfg.model,
        &cfg.train,
        &datasets,
        &sibling(out, ".checkpoint.json"),
    )?;
    ensure_dir(&parent_dir(out))?;
    outcome.params.save(out)?;
    write_json(
        &sibling(out, ".training.json"),
        &TrainingLog::new(&outcome, &cfg.train),
    )?;
    info!("model written to {}", out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ForecastRow<'a> {
    pub id: &'a str,
    /// Timestamp of the first forecast step.
    pub start: String,
    pub point: Vec<f64>,
    pub dists: Vec<StudentT>,
    pub confidence: f64,
}

pub fn forecast_rows<'a>(
    params: &Params,
    series: &'a [TimeSeries],
    horizon: usize,
) -> Result<Vec<ForecastRow<'a>>> {
    series
        .iter()
        .map(|s| {
            let f = forecast(params, s.as_window(), horizon)
                .map_err(|e| CliError::from(e).with_context(&s.id))?;
            Ok(ForecastRow {
                id: &s.id,
                start: format_timestamp(s.timestamp(s.len() as i64)),
                point: f.point,
                dists: f.dists,
                confidence: f.confidence,
            })
        })
        .collect()
}

pub fn forecast_cmd(a: &ForecastArgs) -> Result<()> {
    let out = a.common.output()?;
    let params = load_params(&a.model)?;
    let series = read_series(&a.input)?;
    write_jsonl(out, &forecast_rows(&params, &series, a.horizon)?)
}

/// `p` relative to `dir` when it lies inside it, else absolute.
pub fn relative_to(p: &Path, dir: &Path) -> PathBuf {
    let abs = |x: &Path| x.canonicalize().unwrap_or_else(|_| x.to_path_buf());
    let (pa, da) = (abs(p), abs(dir));
    pa.strip_prefix(&da).map(Path::to_path_buf).unwrap_or(pa)
}

/// Pool spec with every model path rewritten relative to `dir`.
pub fn rebase_pool(pool: &PoolSpec, base: &Path, dir: &Path) -> PoolSpec {
    let mut out = pool.clone();
    for m in &mut out.members {
        if let Some(p) = &m.model {
            m.model = Some(relative_to(&resolve(base, p), dir));
        }
    }
    out
}

/// Per-step rows (K member predictions) and targets over rolling windows.
pub fn linear_rows(
    pool: &hybridcast_fusion::ModelPool,
    datasets: &Datasets,
    bench: &BenchConfig,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (mut rows, mut truth) = (Vec::new(), Vec::new());
    for (_, series) in datasets {
        for s in series {
            let Some(origins) = bench.origins(s.len()) else {
                continue;
            };
            for o in origins {
                let f = pool.forecasts(s.window(0..o), bench.horizon)?;
                for t in 0..bench.horizon {
                    rows.push(f.iter().map(|m| m[t]).collect());
                    truth.push(s.values()[o + t]);
                }
            }
        }
    }
    Ok((rows, truth))
}

pub struct FusionRequest<'a> {
    pub pool: &'a PoolSpec,
    pub base: &'a Path,
    pub mode: FusionMode,
    pub embedder: Option<EmbedderKind>,
    pub router: &'a RouterConfig,
    pub bench: BenchConfig,
}

/// Fits a fusion; model paths in the result are relative to `out_dir`.
pub fn fit_fusion(
    req: &FusionRequest<'_>,
    datasets: &Datasets,
    out_dir: &Path,
) -> Result<FusionFile> {
    let pool = req.pool.build(req.base)?;
    pool.require_fusable()?;
    let mut file = FusionFile {
        mode: req.mode,
        pool: rebase_pool(req.pool, req.base, out_dir),
        horizon: req.bench.horizon,
        embedder: None,
        router: None,
        linear: None,
    };
    match req.mode {
        FusionMode::Average => {}
        FusionMode::Linear => {
            let (rows, truth) = linear_rows(&pool, datasets, &req.bench)?;
            if rows.is_empty() {
                return Err(CliError::Data(
                    "no series long enough for the fusion windows".into(),
                ));
            }
            file.linear = Some(fit_linear_fusion(&rows, &truth)?);
        }
        FusionMode::Router => {
            let kind = req.embedder.unwrap_or(if req.pool.first_tsfm().is_some() {
                EmbedderKind::Tsfm
            } else {
                EmbedderKind::StatScaleFree
            });
            let emb = build_embedder(kind, req.pool, req.base)?;
            file.embedder = Some(kind);
            file.router = Some(train_router(
                &pool,
                emb.as_ref(),
                datasets,
                &req.bench,
                req.router,
            )?);
        }
    }
    Ok(file)
}

pub fn fuse_train(a: &FuseTrainArgs) -> Result<()> {
    let out = a.common.output()?;
    let spec: PoolSpec = read_config(&a.pool)?;
    let base = parent_dir(&a.pool);
    let mut router: RouterConfig = match &a.common.config {
        Some(p) => read_config(p)?,
        None => RouterConfig::default(),
    };
    if let Some(s) = a.common.seed {
        router.seed = s;
    }
    let bench = BenchConfig {
        stride: a.stride,
        ..BenchConfig::new(a.horizon, a.origins)
    };
    let datasets = read_datasets(&a.data)?;
    let req = FusionRequest {
        pool: &spec,
        base: &base,
        mode: a.mode,
        embedder: a.embedder,
        router: &router,
        bench,
    };
    let out_dir = parent_dir(out);
    ensure_dir(&out_dir)?;
    let file = fit_fusion(&req, &datasets, &out_dir)?;
    write_json(out, &file)
}

#[derive(Serialize)]
struct FuseRow<'a> {
    id: &'a str,
    start: String,
    point: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

pub fn fuse(a: &FuseArgs) -> Result<()> {
    let file: FusionFile = read_json(&a.fusion)?;
    let fused = Fused::from_file(&file, &parent_dir(&a.fusion))?;
    let horizon = a.horizon.unwrap_or(file.horizon);
    let series = read_series(&a.input)?;
    let rows = series
        .iter()
        .map(|s| {
            let (point, weights) = fused.fuse(s.as_window(), horizon)?;
            Ok(FuseRow {
                id: &s.id,
                start: format_timestamp(s.timestamp(s.len() as i64)),
                point,
                weights,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    match &a.common.output {
        Some(out) => write_jsonl(out, &rows),
        None => {
            for r in &rows {
                println!(
                    "{}",
                    serde_json::to_string(r).map_err(|e| CliError::Data(e.to_string()))?
                );
            }
            Ok(())
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RouteRow<'a> {
    pub id: &'a str,
    pub route: Route,
    pub s1_confidence: f64,
    pub s2_confidence: Option<f64>,
    pub point: Vec<f64>,
    pub truth: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct CoordinationSummary {
    pub config: CoordinationConfig,
    pub easy: usize,
    pub hard: usize,
    pub challenging: usize,
    pub notice: Option<String>,
    pub final_loss: Option<f64>,
    pub routes: BTreeMap<String, usize>,
    /// FA of each model over the final windows.
    pub fa: BTreeMap<String, f64>,
}

pub struct CoordinationRun<'a> {
    pub s2: LinearArModel,
    pub rows: Vec<RouteRow<'a>>,
    pub summary: CoordinationSummary,
}

/// Distills s2 on every series minus its last `horizon` points, then routes
/// each series' final window.
pub fn run_coordination<'a>(
    s1: &LinearArModel,
    large: &dyn Forecaster,
    series: &'a [TimeSeries],
    cfg: &CoordinationConfig,
    bench: &BenchConfig,
    seed: u64,
) -> Result<CoordinationRun<'a>> {
    let h = bench.horizon;
    let train: Vec<TimeSeries> = series
        .iter()
        .filter(|s| s.len() > h)
        .map(|s| s.with_values(s.id.clone(), s.values()[..s.len() - h].to_vec()))
        .collect::<hybridcast_core::Result<_>>()?;
    let outcome = coordinate_train(s1, large, &train, bench, cfg, seed)?;
    let mut rows = Vec::new();
    let mut routes = BTreeMap::new();
    let (mut truth_all, mut preds): (Vec<f64>, BTreeMap<&str, Vec<f64>>) =
        (Vec::new(), BTreeMap::new());
    for s in series.iter().filter(|s| s.len() > h + s1.min_history()) {
        let o = s.len() - h;
        let w = s.window(0..o);
        let r = coordinate_infer(s1, &outcome.s2, large, w, h, cfg)?;
        let truth = s.values()[o..].to_vec();
        truth_all.extend(&truth);
        preds.entry("cascade").or_default().extend(&r.point);
        preds
            .entry("s1")
            .or_default()
            .extend(s1.forecast(w.values, h)?);
        preds
            .entry("s2")
            .or_default()
            .extend(outcome.s2.forecast(w.values, h)?);
        preds
            .entry("large")
            .or_default()
            .extend(large.predict(w, h)?);
        let tag = serde_json::to_value(r.route)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        *routes.entry(tag).or_insert(0) += 1;
        rows.push(RouteRow {
            id: &s.id,
            route: r.route,
            s1_confidence: baseline_confidence(s1, w.values),
            s2_confidence: r.s2_confidence,
            point: r.point,
            truth,
        });
    }
    let fa_map = if truth_all.iter().any(|v| *v != 0.0) {
        preds
            .into_iter()
            .map(|(k, p)| Ok((k.to_string(), fa(&truth_all, &p)?)))
            .collect::<Result<_>>()?
    } else {
        BTreeMap::new()
    };
    Ok(CoordinationRun {
        summary: CoordinationSummary {
            config: cfg.clone(),
            easy: outcome.easy,
            hard: outcome.hard,
            challenging: outcome.challenging,
            notice: outcome.notice.clone(),
            final_loss: outcome.losses.last().copied(),
            routes,
            fa: fa_map,
        },
        s2: outcome.s2,
        rows,
    })
}

pub fn coordinate(a: &CoordinateArgs) -> Result<()> {
    let out = a.common.output()?;
    let s1: LinearArModel = read_json(&a.s1)?;
    let large = load_forecaster(&a.large)?;
    let mut cfg: CoordinationConfig = match &a.common.config {
        Some(p) => read_config(p)?,
        None => CoordinationConfig::default(),
    };
    if let Some(t) = a.tau {
        cfg.tau1 = t;
    }
    if a.tau2.is_some() {
        cfg.tau2 = a.tau2;
    }
    if let Some(l) = a.lambda {
        cfg.lambda = l;
    }
    cfg.validate()?;
    let series: Vec<TimeSeries> = read_datasets(&a.data)?
        .into_iter()
        .flat_map(|(_, s)| s)
        .collect();
    let bench = BenchConfig::new(a.horizon, a.origins);
    let run = run_coordination(&s1, large.as_ref(), &series, &cfg, &bench, a.common.seed())?;
    ensure_dir(out)?;
    write_json(&out.join("s2.json"), &run.s2)?;
    write_jsonl(&out.join("routes.jsonl"), &run.rows)?;
    write_json(&out.join("coordination.json"), &run.summary)?;
    if let Some(n) = &run.summary.notice {
        info!("{n}");
    }
    info!("routes: {:?}", run.summary.routes);
    Ok(())
}

pub fn load_models(paths: &[PathBuf]) -> Result<Vec<Box<dyn Forecaster>>> {
    let models = paths
        .iter()
        .map(|p| load_forecaster(p))
        .collect::<Result<Vec<_>>>()?;
    let mut seen = std::collections::BTreeSet::new();
    for m in &models {
        if !seen.insert(m.name().to_string()) {
            return Err(CliError::Usage(format!(
                "two models are named `{}`",
                m.name()
            )));
        }
    }
    Ok(models)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let out = a.common.output()?;
    let models = load_models(&a.models)?;
    if a.skill_suite {
        let mut csv = String::from("model,skill,fa,wmape,windows\n");
        for m in &models {
            for r in skill_report(m.as_ref(), a.common.seed())? {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    m.name(),
                    r.skill,
                    r.fa,
                    r.wmape,
                    r.windows
                ));
            }
        }
        return write_text(out, &csv);
    }
    let data = a
        .data
        .as_deref()
        .expect("clap requires --data without --skill-suite");
    let datasets = read_datasets(data)?;
    let bench = BenchConfig {
        stride: a.stride,
        ..BenchConfig::new(a.horizon, a.origins)
    };
    let refs: Vec<&dyn Forecaster> = models
        .iter()
        .map(|m| m.as_ref() as &dyn Forecaster)
        .collect();
    let report = rolling_benchmark(&refs, &datasets, &bench)?;
    write_text(out, &report.to_csv()?)?;
    write_json(&sibling(out, ".json"), &report)
}

#[derive(Serialize)]
struct Info {
    version: &'static str,
    model: ModelConfig,
    train: TrainConfig,
    router: RouterConfig,
    coordination: CoordinationConfig,
    pipeline: crate::pipeline::PipelineConfig,
}

pub fn info(a: &InfoArgs) -> Result<()> {
    let text = serde_json::to_string_pretty(&Info {
        version: env!("CARGO_PKG_VERSION"),
        model: ModelConfig::default(),
        train: TrainConfig::default(),
        router: RouterConfig::default(),
        coordination: CoordinationConfig::default(),
        pipeline: crate::pipeline::PipelineConfig::example(),
    })
    .map_err(|e| CliError::Data(e.to_string()))?;
    match &a.common.output {
        Some(p) => write_text(p, &(text + "\n")),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
