//! Experiment harness: metrics, configuration, seeded runs and result files.
//!
//! A run takes one dataset, one model and one injection mode over a list of
//! seeds. Every seed is an isolated deterministic unit: it splits,
//! normalizes, trains and evaluates on the held-out split. Seeds run in
//! parallel up to `workers` threads. A seed that fails is recorded with its
//! error and the aggregates cover the surviving seeds.

mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{prepare, Catalog, Dataset, DatasetKind, SplitData};
use crate::error::{Error, Result};
use crate::fuzzy::FuzzyPartition;
use crate::networks::{train_cgan, train_dnn, Checkpoint, DnnSpec, GanSpec, InjectionMode, OptimizerSettings, TrainingHistory};
use crate::seeded_rng;
use crate::tensor::Tensor;

pub use report::{
    best_per_dataset, emit_results, improvement_percent, read_results, summary_csv, write_atomic,
    SummaryRow, RESULT_SUFFIX, SUMMARY_FILE,
};

/// Seed offset for the noise used when scoring a trained generator.
const PREDICT_STREAM: u64 = 0xA076_1D64_78BD_642F;

fn check_lengths(op: &'static str, y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::Dimension {
            op,
            left: (y.len(), 1),
            right: (y_hat.len(), 1),
        });
    }
    if y.is_empty() {
        return Err(Error::domain(op, "no observations"));
    }
    Ok(())
}

/// Mean squared error.
pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths("mse", y, y_hat)?;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

/// Mean absolute error.
pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_lengths("mae", y, y_hat)?;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Cgan,
    Dnn,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Cgan => "cgan",
            ModelKind::Dnn => "dnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cgan" => Ok(ModelKind::Cgan),
            "dnn" => Ok(ModelKind::Dnn),
            other => Err(Error::Config(format!("unknown model {other:?} (expected cgan or dnn)"))),
        }
    }
}

/// Hyperparameters that replace the published defaults. Read from a flat
/// TOML document; unknown keys are rejected.
///
/// `learning_rate` and `decay` apply to every optimizer in the run; the
/// `generator_*` and `discriminator_*` keys take precedence for the CGAN.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub decay: Option<f64>,
    pub generator_learning_rate: Option<f64>,
    pub generator_decay: Option<f64>,
    pub discriminator_learning_rate: Option<f64>,
    pub discriminator_decay: Option<f64>,
    pub noise_draws: Option<usize>,
    pub branch_width: Option<usize>,
    pub generator_hidden: Option<Vec<usize>>,
    pub discriminator_hidden: Option<Vec<usize>>,
    pub partition: Option<FuzzyPartition>,
    /// DNN hidden widths.
    pub hidden: Option<Vec<usize>>,
    pub dropout: Option<f64>,
}

impl Overrides {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(&mut self, other: Overrides) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            epochs,
            batch_size,
            learning_rate,
            decay,
            generator_learning_rate,
            generator_decay,
            discriminator_learning_rate,
            discriminator_decay,
            noise_draws,
            branch_width,
            generator_hidden,
            discriminator_hidden,
            partition,
            hidden,
            dropout
        );
    }

    fn optimizer(&self, base: OptimizerSettings, lr: Option<f64>, decay: Option<f64>) -> OptimizerSettings {
        OptimizerSettings {
            learning_rate: lr.or(self.learning_rate).unwrap_or(base.learning_rate),
            decay: decay.or(self.decay).unwrap_or(base.decay),
        }
    }

    pub fn apply_gan(&self, spec: &mut GanSpec) {
        if let Some(v) = self.epochs {
            spec.epochs = v;
        }
        if let Some(v) = self.batch_size {
            spec.batch_size = v;
        }
        if let Some(v) = self.noise_draws {
            spec.noise_draws = v;
        }
        if let Some(v) = self.branch_width {
            spec.branch_width = v;
        }
        if let Some(v) = &self.generator_hidden {
            spec.generator_hidden = v.clone();
        }
        if let Some(v) = &self.discriminator_hidden {
            spec.discriminator_hidden = v.clone();
        }
        if let Some(v) = self.partition {
            spec.partition = v;
        }
        spec.generator_optimizer = self.optimizer(
            spec.generator_optimizer,
            self.generator_learning_rate,
            self.generator_decay,
        );
        spec.discriminator_optimizer = self.optimizer(
            spec.discriminator_optimizer,
            self.discriminator_learning_rate,
            self.discriminator_decay,
        );
    }

    pub fn apply_dnn(&self, spec: &mut DnnSpec) {
        if let Some(v) = self.epochs {
            spec.epochs = v;
        }
        if let Some(v) = self.batch_size {
            spec.batch_size = v;
        }
        if let Some(v) = &self.hidden {
            spec.hidden = v.clone();
        }
        if let Some(v) = self.dropout {
            spec.dropout = v;
        }
        spec.optimizer = self.optimizer(spec.optimizer, None, None);
    }
}

fn default_split() -> f64 {
    0.8
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub model: ModelKind,
    pub injection: InjectionMode,
    pub seeds: Vec<u64>,
    /// Training fraction.
    #[serde(default = "default_split")]
    pub split: f64,
    #[serde(default)]
    pub overrides: Overrides,
    pub out_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Write trained parameters next to the results.
    #[serde(default)]
    pub save_checkpoints: bool,
}

impl ExperimentConfig {
    pub fn new(dataset: impl Into<String>, model: ModelKind, injection: InjectionMode, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset: dataset.into(),
            model,
            injection,
            seeds: (0..5).collect(),
            split: default_split(),
            overrides: Overrides::default(),
            out_dir: out_dir.into(),
            workers: default_workers(),
            save_checkpoints: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.model == ModelKind::Dnn && self.injection != InjectionMode::None {
            return Err(Error::Config(format!(
                "injection {} requires the cgan model",
                self.injection
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config(format!("split {} outside (0, 1)", self.split)));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// `<dataset>_<model>_<injection>`, used for file names.
    pub fn stem(&self) -> String {
        format!("{}_{}_{}", self.dataset, self.model, self.injection)
    }

    /// CGAN spec: the dataset's published preset with overrides applied.
    /// Datasets outside the builtin five start from the abalone preset.
    pub fn gan_spec(&self, features: usize) -> GanSpec {
        let kind = self.dataset.parse().unwrap_or(DatasetKind::Abalone);
        let mut spec = GanSpec::preset(kind, self.injection);
        spec.input_dim = features;
        self.overrides.apply_gan(&mut spec);
        spec
    }

    pub fn dnn_spec(&self, features: usize) -> DnnSpec {
        let mut spec = DnnSpec::preset(features);
        self.overrides.apply_dnn(&mut spec);
        spec
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    /// Errors in normalized target units.
    pub nmae: f64,
    pub nmse: f64,
    /// Errors in original target units.
    pub mae: f64,
    pub mse: f64,
    /// `max - min` of the training targets.
    pub target_range: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub metrics: Option<SeedMetrics>,
    pub error: Option<String>,
    pub history: TrainingHistory,
}

/// Mean and sample standard deviation (zero for fewer than two values).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub nmae: Spread,
    pub nmse: Spread,
    pub mae: Spread,
    pub mse: Spread,
    /// Seeds that finished.
    pub completed: usize,
}

impl Aggregates {
    pub fn from_seeds(seeds: &[SeedResult]) -> Option<Self> {
        let ok: Vec<SeedMetrics> = seeds.iter().filter_map(|s| s.metrics).collect();
        if ok.is_empty() {
            return None;
        }
        let spread = |f: fn(&SeedMetrics) -> f64| Spread::of(&ok.iter().map(f).collect::<Vec<_>>());
        Some(Self {
            nmae: spread(|m| m.nmae),
            nmse: spread(|m| m.nmse),
            mae: spread(|m| m.mae),
            mse: spread(|m| m.mse),
            completed: ok.len(),
        })
    }
}

/// Label written into every result for the `std` fields.
pub const SPREAD_MEANING: &str = "sample standard deviation across seeds";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub spread: String,
    pub seeds: Vec<SeedResult>,
    pub aggregate: Aggregates,
}

/// Trained model of one seed, reduced to what evaluation needs.
enum Trained {
    Gan(crate::networks::TrainedGan),
    Dnn(crate::networks::TrainedDnn),
}

impl Trained {
    fn history(&self) -> &TrainingHistory {
        match self {
            Trained::Gan(g) => &g.history,
            Trained::Dnn(d) => &d.history,
        }
    }

    fn predict(&self, x: &Tensor, seed: u64) -> Result<Tensor> {
        match self {
            Trained::Gan(g) => g.predict(x, &mut seeded_rng(seed ^ PREDICT_STREAM)),
            Trained::Dnn(d) => d.predict(x),
        }
    }

    fn checkpoint(&self) -> Checkpoint {
        match self {
            Trained::Gan(g) => Checkpoint::from_networks(&[
                ("generator", &g.generator),
                ("discriminator", &g.discriminator),
            ]),
            Trained::Dnn(d) => Checkpoint::from_networks(&[("dnn", &d.params)]),
        }
    }
}

/// Test-split metrics of `y_hat` (normalized predictions).
pub fn evaluate(data: &SplitData, y_hat: &Tensor) -> Result<SeedMetrics> {
    let y = &data.test_y;
    let nmae = mae(y.data(), y_hat.data())?;
    let nmse = mse(y.data(), y_hat.data())?;
    let y_orig = data.params.denormalize_target(y);
    let y_hat_orig = data.params.denormalize_target(y_hat);
    let mae = mae(y_orig.data(), y_hat_orig.data())?;
    let mse = mse(y_orig.data(), y_hat_orig.data())?;
    if mae * mae > mse * (1.0 + 1e-12) {
        return Err(Error::Contract(format!("MAE^2 = {} exceeds MSE = {mse}", mae * mae)));
    }
    Ok(SeedMetrics {
        nmae,
        nmse,
        mae,
        mse,
        target_range: data.params.target_range(),
    })
}

type SeedRun = (SeedMetrics, TrainingHistory, Trained);

fn run_seed(config: &ExperimentConfig, dataset: &Dataset, seed: u64) -> Result<SeedRun> {
    let data = prepare(dataset, config.split, seed)?;
    let trained = match config.model {
        ModelKind::Cgan => Trained::Gan(train_cgan(&data, &config.gan_spec(dataset.features()), seed)?),
        ModelKind::Dnn => Trained::Dnn(train_dnn(&data, &config.dnn_spec(dataset.features()), seed)?),
    };
    let y_hat = trained.predict(&data.test_x, seed)?;
    let metrics = evaluate(&data, &y_hat)?;
    Ok((metrics, trained.history().clone(), trained))
}

/// Trains and evaluates every seed of `config` on `dataset`.
///
/// Fails only if the configuration is invalid or every seed fails.
pub fn run_experiment(config: &ExperimentConfig, dataset: &Dataset) -> Result<ExperimentResult> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let outcomes: Vec<(u64, Result<SeedRun>)> = pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| (seed, run_seed(config, dataset, seed)))
            .collect()
    });

    let mut seeds = Vec::with_capacity(outcomes.len());
    let mut first_error = None;
    for (seed, outcome) in outcomes {
        match outcome {
            Ok((metrics, history, trained)) => {
                info!(
                    "{} seed {seed}: nmae {:.5} nmse {:.6}",
                    config.stem(),
                    metrics.nmae,
                    metrics.nmse
                );
                if config.save_checkpoints {
                    let path = config
                        .out_dir
                        .join("checkpoints")
                        .join(format!("{}_seed{seed}.json", config.stem()));
                    trained.checkpoint().write(&path)?;
                }
                seeds.push(SeedResult {
                    seed,
                    metrics: Some(metrics),
                    error: None,
                    history,
                });
            }
            Err(e) => {
                warn!("{} seed {seed} failed: {e}", config.stem());
                seeds.push(SeedResult {
                    seed,
                    metrics: None,
                    error: Some(e.to_string()),
                    history: Vec::new(),
                });
                first_error.get_or_insert(e);
            }
        }
    }

    let aggregate = match Aggregates::from_seeds(&seeds) {
        Some(a) => a,
        None => {
            let e = first_error.expect("every seed failed, so one error was recorded");
            return Err(Error::State(format!("all {} seeds failed; first error: {e}", seeds.len())));
        }
    };
    if aggregate.completed < seeds.len() {
        warn!(
            "{}: aggregating over {} of {} seeds",
            config.stem(),
            aggregate.completed,
            seeds.len()
        );
    }
    Ok(ExperimentResult {
        config: config.clone(),
        spread: SPREAD_MEANING.to_string(),
        seeds,
        aggregate,
    })
}

/// Loads the dataset from `catalog`, runs it and writes all artifacts.
pub fn execute(config: &ExperimentConfig, catalog: &Catalog) -> Result<ExperimentResult> {
    config.validate()?;
    let dataset = catalog.load(&config.dataset)?;
    let result = run_experiment(config, &dataset)?;
    emit_results(std::slice::from_ref(&result), &config.out_dir)?;
    Ok(result)
}
