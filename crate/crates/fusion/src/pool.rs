//! Ordered sets of forecasters and their per-dataset profiles.

use std::collections::BTreeSet;

use hybridcast_core::eval::{rolling_benchmark, BenchConfig};
use hybridcast_core::{Error, Forecaster, Result, TimeSeries, Window};
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub struct PoolMember {
    /// Unique within the pool; defaults to the forecaster's own name.
    pub name: String,
    pub forecaster: Box<dyn Forecaster>,
    /// Model family, e.g. `seasonal_naive`.
    pub kind: String,
    /// Where the member's parameters came from.
    pub provenance: String,
}

impl PoolMember {
    pub fn new(
        forecaster: Box<dyn Forecaster>,
        kind: impl Into<String>,
        provenance: impl Into<String>,
    ) -> Self {
        Self {
            name: forecaster.name().to_string(),
            forecaster,
            kind: kind.into(),
            provenance: provenance.into(),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// Members in a fixed order; weight vectors index by it.
pub struct ModelPool {
    members: Vec<PoolMember>,
}

impl ModelPool {
    pub fn new(members: Vec<PoolMember>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for m in &members {
            if !seen.insert(m.name().to_string()) {
                return Err(Error::arg(format!("duplicate pool member `{}`", m.name())));
            }
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[PoolMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.members.iter().map(|m| m.name().to_string()).collect()
    }

    /// Fails unless the pool has at least two members.
    pub fn require_fusable(&self) -> Result<()> {
        if self.members.len() < 2 {
            return Err(Error::arg(format!(
                "fusion needs at least 2 pool members, got {}",
                self.members.len()
            )));
        }
        Ok(())
    }

    /// Every member's forecast of `history`, in pool order, computed in
    /// parallel.
    pub fn forecasts(&self, history: Window<'_>, horizon: usize) -> Result<Vec<Vec<f64>>> {
        self.members
            .par_iter()
            .map(|m| {
                let f = m.forecaster.predict(history, horizon)?;
                if f.len() != horizon {
                    return Err(Error::Numeric(format!(
                        "{} returned {} steps for horizon {horizon}",
                        m.name(),
                        f.len()
                    )));
                }
                Ok(f)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub member: String,
    pub dataset: String,
    pub fa: f64,
    pub wmape: f64,
    pub mape: Option<f64>,
    /// `None` when the member has no confidence score.
    pub mean_confidence: Option<f64>,
    pub windows: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub entries: Vec<ProfileEntry>,
}

impl ModelProfile {
    pub fn get(&self, member: &str, dataset: &str) -> Option<&ProfileEntry> {
        self.entries
            .iter()
            .find(|e| e.member == member && e.dataset == dataset)
    }

    pub fn datasets(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.entries.iter().map(|e| &e.dataset).collect();
        set.into_iter().cloned().collect()
    }

    /// Members on `dataset` from highest to lowest FA (ties by pool order).
    pub fn ranking(&self, dataset: &str) -> Vec<String> {
        let mut rows: Vec<&ProfileEntry> = self
            .entries
            .iter()
            .filter(|e| e.dataset == dataset)
            .collect();
        rows.sort_by(|a, b| b.fa.total_cmp(&a.fa));
        rows.into_iter().map(|e| e.member.clone()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("member,dataset,fa,wmape,mape,mean_confidence,windows\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.member,
                e.dataset,
                e.fa,
                e.wmape,
                opt(e.mape),
                opt(e.mean_confidence),
                e.windows
            ));
        }
        out
    }
}

/// A member under its pool name.
struct Named<'a>(&'a PoolMember);

impl Forecaster for Named<'_> {
    fn name(&self) -> &str {
        &self.0.name
    }
    fn predict(&self, history: Window<'_>, horizon: usize) -> Result<Vec<f64>> {
        self.0.forecaster.predict(history, horizon)
    }
    fn confidence(&self, history: Window<'_>, horizon: usize) -> Result<f64> {
        self.0.forecaster.confidence(history, horizon)
    }
    fn predict_distribution(
        &self,
        history: Window<'_>,
        horizon: usize,
    ) -> Result<Option<Vec<hybridcast_core::stats::StudentT>>> {
        self.0.forecaster.predict_distribution(history, horizon)
    }
}

/// Rolling-origin profile of every member on every dataset. Datasets whose
/// series are all too short are skipped with a warning.
pub fn profile(
    pool: &ModelPool,
    datasets: &[(String, Vec<TimeSeries>)],
    cfg: &BenchConfig,
) -> Result<ModelProfile> {
    let named: Vec<Named<'_>> = pool.members.iter().map(Named).collect();
    let models: Vec<&dyn Forecaster> = named.iter().map(|m| m as &dyn Forecaster).collect();
    let report = rolling_benchmark(&models, datasets, cfg)?;
    let mut entries = Vec::with_capacity(report.rows.len());
    for (name, series) in datasets {
        if !report.rows.iter().any(|r| &r.dataset == name) {
            warn!("profile: dataset {name} has no series long enough; skipped");
            continue;
        }
        for m in &pool.members {
            let Some(row) = report.get(m.name(), name) else {
                continue;
            };
            entries.push(ProfileEntry {
                member: row.model.clone(),
                dataset: name.clone(),
                fa: row.fa,
                wmape: row.wmape,
                mape: row.mape,
                mean_confidence: mean_confidence(m.forecaster.as_ref(), series, cfg)?,
                windows: row.windows,
            });
        }
    }
    Ok(ModelProfile { entries })
}

fn mean_confidence(
    f: &dyn Forecaster,
    series: &[TimeSeries],
    cfg: &BenchConfig,
) -> Result<Option<f64>> {
    let mut scores = Vec::new();
    for s in series {
        let Some(origins) = cfg.origins(s.len()) else {
            continue;
        };
        for o in origins {
            match f.confidence(s.window(0..o), cfg.horizon) {
                Ok(c) => scores.push(c),
                Err(Error::NoConfidence(_)) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
    }
    Ok((!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64))
}
