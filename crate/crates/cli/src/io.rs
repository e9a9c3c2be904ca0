//! Reading inputs and writing artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use hybridcast_core::data::{ingest, ingest_dir, Format, Ingested};
use hybridcast_core::TimeSeries;
use log::warn;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

pub type Datasets = Vec<(String, Vec<TimeSeries>)>;

fn require_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{}: no such file or directory",
            path.display()
        )))
    }
}

fn report_rejections(name: &str, ing: &Ingested) {
    for r in &ing.rejected {
        warn!("{name}: line {}: rejected `{}`: {}", r.line, r.id, r.reason);
    }
}

pub fn read_series(path: &Path) -> Result<Vec<TimeSeries>> {
    require_exists(path)?;
    let ing = ingest(path, Format::from_path(path))?;
    report_rejections(&path.display().to_string(), &ing);
    Ok(ing.series)
}

/// A directory yields one dataset per `.jsonl`/`.csv` file, named by file
/// stem; a single file is one dataset.
pub fn read_datasets(path: &Path) -> Result<Datasets> {
    require_exists(path)?;
    if path.is_dir() {
        Ok(ingest_dir(path)?
            .into_iter()
            .map(|(name, ing)| {
                report_rejections(&name, &ing);
                (name, ing.series)
            })
            .collect())
    } else {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("dataset")
            .to_string();
        Ok(vec![(name, read_series(path)?)])
    }
}

fn read_text(path: &Path) -> Result<String> {
    require_exists(path)?;
    fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

/// A configuration file; parse failures and unknown keys are usage errors.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// A data artifact; parse failures are data errors.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn read_value(path: &Path) -> Result<serde_json::Value> {
    read_json(path)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// One compact JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r).map_err(|e| CliError::Data(e.to_string()))?);
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

/// `path` with its extension replaced by `suffix` (e.g. `.training.json`).
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Resolves `p` against `base` unless it is absolute.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}
