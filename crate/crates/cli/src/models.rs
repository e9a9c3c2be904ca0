//! Model specifications, model files and forecaster adapters.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use hybridcast_core::baselines::{AutoAr, LinearArModel, Naive, SeasonalNaive, Ses};
use hybridcast_core::stats::StudentT;
use hybridcast_core::{Forecaster, Result as CoreResult, Window};
use hybridcast_fusion::combine::LinearFusion;
use hybridcast_fusion::{
    coordinate_infer, fuse_average, route_fuse, CoordinationConfig, Embedder, ModelPool,
    PoolMember, RouterParams, StatEmbedder,
};
use hybridcast_tsfm::{embed_series, Params, TsfmForecaster};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{read_json, read_value, resolve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberKind {
    Naive,
    SeasonalNaive,
    Ses,
    Ar,
    Tsfm,
}

impl MemberKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MemberKind::Naive => "naive",
            MemberKind::SeasonalNaive => "seasonal_naive",
            MemberKind::Ses => "ses",
            MemberKind::Ar => "ar",
            MemberKind::Tsfm => "tsfm",
        }
    }
}

/// One pool member or standalone model, as written in pool and model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberSpec {
    pub kind: MemberKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Seasonal naive period; the series' own period when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub differenced: bool,
    /// Model file of a `tsfm` member, relative to the file that names it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

impl MemberSpec {
    pub fn of(kind: MemberKind) -> Self {
        Self {
            kind,
            name: None,
            period: None,
            alpha: None,
            order: None,
            max_order: None,
            differenced: false,
            model: None,
        }
    }

    pub fn name(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.kind.as_str().to_string())
    }

    fn check(&self) -> Result<()> {
        let fail = |m: &str| Err(CliError::Usage(format!("member `{}`: {m}", self.name())));
        if (self.kind == MemberKind::Tsfm) != self.model.is_some() {
            return fail("`model` is required for tsfm members and only allowed there");
        }
        if self.alpha.is_some() && self.kind != MemberKind::Ses {
            return fail("`alpha` applies to ses only");
        }
        if self.period.is_some() && self.kind != MemberKind::SeasonalNaive {
            return fail("`period` applies to seasonal_naive only");
        }
        if (self.order.is_some() || self.max_order.is_some() || self.differenced)
            && self.kind != MemberKind::Ar
        {
            return fail("`order`, `max_order` and `differenced` apply to ar only");
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return fail("`alpha` must lie in (0, 1]");
            }
        }
        Ok(())
    }

    /// Builds the forecaster; `base` resolves a relative tsfm model path.
    pub fn build(&self, base: &Path) -> Result<Box<dyn Forecaster>> {
        self.check()?;
        let name = self.name();
        Ok(match self.kind {
            MemberKind::Naive => Box::new(Labeled::new(name, Box::new(Naive))),
            MemberKind::SeasonalNaive => Box::new(Labeled::new(
                name,
                Box::new(SeasonalNaive {
                    period: self.period,
                }),
            )),
            MemberKind::Ses => {
                let ses = Ses {
                    alpha: self.alpha.unwrap_or(Ses::default().alpha),
                };
                Box::new(Labeled::new(name, Box::new(ses)))
            }
            MemberKind::Ar => {
                let d = AutoAr::default();
                let ar = AutoAr {
                    order: self.order,
                    max_order: self.max_order.unwrap_or(d.max_order),
                    differenced: self.differenced,
                };
                Box::new(Labeled::new(name, Box::new(ar)))
            }
            MemberKind::Tsfm => {
                let path = resolve(base, self.model.as_deref().expect("checked"));
                Box::new(TsfmForecaster::named(load_params(&path)?, name))
            }
        })
    }
}

pub fn load_params(path: &Path) -> Result<Params> {
    if !path.exists() {
        return Err(CliError::Data(format!(
            "{}: no such file or directory",
            path.display()
        )));
    }
    Ok(Params::load(path)?)
}

/// Pool file: members in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    pub members: Vec<MemberSpec>,
}

impl PoolSpec {
    pub fn build(&self, base: &Path) -> Result<ModelPool> {
        let members = self
            .members
            .iter()
            .map(|m| {
                let f = m.build(base)?;
                Ok(PoolMember::new(f, m.kind.as_str(), provenance(m)))
            })
            .collect::<Result<Vec<_>>>()?;
        let pool = ModelPool::new(members)?;
        Ok(pool)
    }

    /// The first tsfm member, if any.
    pub fn first_tsfm(&self) -> Option<&MemberSpec> {
        self.members.iter().find(|m| m.kind == MemberKind::Tsfm)
    }
}

fn provenance(m: &MemberSpec) -> String {
    match &m.model {
        Some(p) => format!("model file {}", p.display()),
        None => "fitted per history".into(),
    }
}

/// Loads any model file the toolkit writes: a transformer model file, a
/// member spec, or a fitted AR model. The name is the spec's name, else
/// the file stem.
pub fn load_forecaster(path: &Path) -> Result<Box<dyn Forecaster>> {
    let value = read_value(path)?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("model")
        .to_string();
    let base = crate::io::parent_dir(path);
    if value.get("format_version").is_some() {
        return Ok(Box::new(TsfmForecaster::named(load_params(path)?, stem)));
    }
    if value.get("kind").is_some() {
        let mut spec: MemberSpec = serde_json::from_value(value)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        spec.name.get_or_insert(stem);
        return spec.build(&base);
    }
    if value.get("coef").is_some() {
        let m: LinearArModel = read_json(path)?;
        return Ok(Box::new(Labeled::new(stem, Box::new(m))));
    }
    Err(CliError::Data(format!(
        "{}: not a model file (expected a transformer model, a member spec or an AR model)",
        path.display()
    )))
}

/// A forecaster reported under another name.
pub struct Labeled {
    name: String,
    inner: Box<dyn Forecaster>,
}

impl Labeled {
    pub fn new(name: impl Into<String>, inner: Box<dyn Forecaster>) -> Self {
        Self {
            name: name.into(),
            inner,
        }
    }
}

impl Forecaster for Labeled {
    fn name(&self) -> &str {
        &self.name
    }
    fn predict(&self, history: Window<'_>, horizon: usize) -> CoreResult<Vec<f64>> {
        self.inner.predict(history, horizon)
    }
    fn confidence(&self, history: Window<'_>, horizon: usize) -> CoreResult<f64> {
        self.inner.confidence(history, horizon)
    }
    fn predict_distribution(
        &self,
        history: Window<'_>,
        horizon: usize,
    ) -> CoreResult<Option<Vec<StudentT>>> {
        self.inner.predict_distribution(history, horizon)
    }
}

/// Mean hidden state of a transformer as the routing embedding.
pub struct TsfmEmbedder {
    pub params: Params,
    name: String,
}

impl TsfmEmbedder {
    pub fn new(params: Params, member: &str) -> Self {
        Self {
            params,
            name: format!("tsfm:{member}"),
        }
    }
}

impl Embedder for TsfmEmbedder {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.params.config().d_model
    }
    fn embed(&self, history: Window<'_>) -> CoreResult<Vec<f64>> {
        Ok(embed_series(&self.params, history)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum EmbedderKind {
    /// Mean, std, lag-1 autocorrelation, slope, seasonal strength, spectral
    /// entropy.
    Stat,
    /// The same statistics made invariant to rescaling.
    #[default]
    StatScaleFree,
    /// Hidden states of the pool's first transformer member.
    Tsfm,
}

pub fn build_embedder(
    kind: EmbedderKind,
    pool: &PoolSpec,
    base: &Path,
) -> Result<Box<dyn Embedder>> {
    Ok(match kind {
        EmbedderKind::Stat => Box::new(StatEmbedder::default()),
        EmbedderKind::StatScaleFree => Box::new(StatEmbedder::scale_free()),
        EmbedderKind::Tsfm => {
            let m = pool.first_tsfm().ok_or_else(|| {
                CliError::Usage("the tsfm embedder needs a tsfm pool member".into())
            })?;
            let path = resolve(
                base,
                m.model.as_deref().expect("tsfm members carry a model"),
            );
            Box::new(TsfmEmbedder::new(load_params(&path)?, &m.name()))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    Router,
    Linear,
    Average,
}

/// A fitted combination of pool members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionFile {
    pub mode: FusionMode,
    /// Model paths are relative to the fusion file.
    pub pool: PoolSpec,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedder: Option<EmbedderKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub router: Option<RouterParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearFusion>,
}

/// Pool members combined into one forecaster.
pub struct Fused {
    name: String,
    pool: Arc<ModelPool>,
    combiner: Combiner,
}

enum Combiner {
    Average,
    Linear(LinearFusion),
    Router(RouterParams, Box<dyn Embedder>),
}

impl Fused {
    pub fn average(name: impl Into<String>, pool: Arc<ModelPool>) -> Self {
        Self {
            name: name.into(),
            pool,
            combiner: Combiner::Average,
        }
    }

    pub fn linear(name: impl Into<String>, pool: Arc<ModelPool>, fit: LinearFusion) -> Self {
        Self {
            name: name.into(),
            pool,
            combiner: Combiner::Linear(fit),
        }
    }

    pub fn router(
        name: impl Into<String>,
        pool: Arc<ModelPool>,
        router: RouterParams,
        emb: Box<dyn Embedder>,
    ) -> Self {
        Self {
            name: name.into(),
            pool,
            combiner: Combiner::Router(router, emb),
        }
    }

    pub fn from_file(file: &FusionFile, base: &Path) -> Result<Self> {
        let pool = Arc::new(file.pool.build(base)?);
        let name = match file.mode {
            FusionMode::Router => "fused_router",
            FusionMode::Linear => "fused_linear",
            FusionMode::Average => "fused_average",
        };
        let missing = |what: &str| {
            CliError::Data(format!(
                "fusion file in {:?} mode lacks `{what}`",
                file.mode
            ))
        };
        Ok(match file.mode {
            FusionMode::Average => Fused::average(name, pool),
            FusionMode::Linear => Fused::linear(
                name,
                pool,
                file.linear.clone().ok_or_else(|| missing("linear"))?,
            ),
            FusionMode::Router => {
                let router = file.router.clone().ok_or_else(|| missing("router"))?;
                let emb = build_embedder(file.embedder.unwrap_or_default(), &file.pool, base)?;
                if emb.name() != router.embedder {
                    return Err(CliError::Data(format!(
                        "router was trained on `{}` features but the file selects `{}`",
                        router.embedder,
                        emb.name()
                    )));
                }
                Fused::router(name, pool, router, emb)
            }
        })
    }

    /// Point forecast plus routing weights (router mode only).
    pub fn fuse(
        &self,
        history: Window<'_>,
        horizon: usize,
    ) -> CoreResult<(Vec<f64>, Option<Vec<f64>>)> {
        match &self.combiner {
            Combiner::Average => Ok((fuse_average(&self.pool.forecasts(history, horizon)?)?, None)),
            Combiner::Linear(fit) => {
                Ok((fit.combine(&self.pool.forecasts(history, horizon)?)?, None))
            }
            Combiner::Router(r, emb) => {
                let out = route_fuse(r, emb.as_ref(), history, &self.pool, horizon)?;
                Ok((out.point, Some(out.weights)))
            }
        }
    }

    pub fn pool(&self) -> &ModelPool {
        &self.pool
    }
}

impl Forecaster for Fused {
    fn name(&self) -> &str {
        &self.name
    }
    fn predict(&self, history: Window<'_>, horizon: usize) -> CoreResult<Vec<f64>> {
        self.fuse(history, horizon).map(|(p, _)| p)
    }
}

/// s1 → s2 → large cascade as a forecaster.
pub struct Cascade {
    pub s1: LinearArModel,
    pub s2: LinearArModel,
    pub large: Arc<dyn Forecaster>,
    pub cfg: CoordinationConfig,
}

impl Forecaster for Cascade {
    fn name(&self) -> &str {
        "cascade"
    }
    fn predict(&self, history: Window<'_>, horizon: usize) -> CoreResult<Vec<f64>> {
        coordinate_infer(
            &self.s1,
            &self.s2,
            self.large.as_ref(),
            history,
            horizon,
            &self.cfg,
        )
        .map(|r| r.point)
    }
}
