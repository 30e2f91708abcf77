//! Result files.
//!
//! An output directory holds:
//!
//! - `<dataset>_<model>_<injection>.result.json`: one [`ExperimentResult`]
//!   with per-seed metrics and histories.
//! - `summary.csv`: one aggregate row per result file in the directory.
//! - `history/<dataset>_<model>_<injection>_seed<k>.csv`: per-epoch losses.
//!
//! Every file is written to a temporary name and renamed into place.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentResult, ModelKind};
use crate::error::{Error, Result};
use crate::networks::TrainingHistory;

pub const RESULT_SUFFIX: &str = ".result.json";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Writes `bytes` to a sibling temporary file, then renames it to `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()
    };
    write().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// One aggregate row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub model: ModelKind,
    pub injection: String,
    pub nmae_mean: f64,
    pub nmae_std: f64,
    pub nmse_mean: f64,
    pub nmse_std: f64,
    pub mae_mean: f64,
    pub mae_std: f64,
    pub mse_mean: f64,
    pub mse_std: f64,
}

impl From<&ExperimentResult> for SummaryRow {
    fn from(r: &ExperimentResult) -> Self {
        let a = &r.aggregate;
        Self {
            dataset: r.config.dataset.clone(),
            model: r.config.model,
            injection: r.config.injection.to_string(),
            nmae_mean: a.nmae.mean,
            nmae_std: a.nmae.std,
            nmse_mean: a.nmse.mean,
            nmse_std: a.nmse.std,
            mae_mean: a.mae.mean,
            mae_std: a.mae.std,
            mse_mean: a.mse.mean,
            mse_std: a.mse.std,
        }
    }
}

/// Header plus one row per result.
pub fn summary_csv(results: &[ExperimentResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in results {
        w.serialize(SummaryRow::from(r))?;
    }
    if results.is_empty() {
        w.write_record([
            "dataset", "model", "injection", "nmae_mean", "nmae_std", "nmse_mean", "nmse_std",
            "mae_mean", "mae_std", "mse_mean", "mse_std",
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Contract(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn history_csv(history: &TrainingHistory) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "loss", "discriminator_loss", "validation_nmae"])?;
    for rec in history {
        w.write_record([
            rec.epoch.to_string(),
            rec.loss.to_string(),
            rec.discriminator_loss.map(|v| v.to_string()).unwrap_or_default(),
            rec.validation_nmae.to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Contract(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn result_path(dir: &Path, result: &ExperimentResult) -> PathBuf {
    dir.join(format!("{}{RESULT_SUFFIX}", result.config.stem()))
}

/// Writes result JSON and history files for `results`, then rebuilds
/// `summary.csv` from every result file in `dir`.
pub fn emit_results(results: &[ExperimentResult], dir: &Path) -> Result<()> {
    if results.is_empty() {
        return Err(Error::Config("no results to write".into()));
    }
    for r in results {
        write_atomic(&result_path(dir, r), serde_json::to_string_pretty(r)?.as_bytes())?;
        for seed in r.seeds.iter().filter(|s| !s.history.is_empty()) {
            let path = dir
                .join("history")
                .join(format!("{}_seed{}.csv", r.config.stem(), seed.seed));
            write_atomic(&path, history_csv(&seed.history)?.as_bytes())?;
        }
    }
    let all = read_results(dir)?;
    write_atomic(&dir.join(SUMMARY_FILE), summary_csv(&all)?.as_bytes())
}

/// Every result file in `dir`, ordered by file name.
pub fn read_results(dir: &Path) -> Result<Vec<ExperimentResult>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(RESULT_SUFFIX) && !n.starts_with('.'))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}

/// Lowest-NMAE CGAN result per dataset.
pub fn best_per_dataset(results: &[ExperimentResult]) -> Vec<&ExperimentResult> {
    let mut best: BTreeMap<&str, &ExperimentResult> = BTreeMap::new();
    for r in results.iter().filter(|r| r.config.model == ModelKind::Cgan) {
        best.entry(r.config.dataset.as_str())
            .and_modify(|b| {
                if r.aggregate.nmae.mean < b.aggregate.nmae.mean {
                    *b = r;
                }
            })
            .or_insert(r);
    }
    best.into_values().collect()
}

/// Relative reduction of `candidate` against `baseline`, in percent.
pub fn improvement_percent(baseline: f64, candidate: f64) -> f64 {
    (baseline - candidate) / baseline * 100.0
}
