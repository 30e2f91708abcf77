//! Tabular regression datasets: CSV ingestion, target scaling, min-max
//! normalization and seeded train/test splits.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeded_rng;
use crate::tensor::Tensor;

/// Environment variable naming the directory holding the dataset CSVs.
pub const DATA_DIR_ENV: &str = "FUZZY_CGAN_DATA";

/// Abalone's leading sex column.
const ABALONE_SEX_TOKENS: [&str; 3] = ["M", "F", "I"];

/// The five benchmark datasets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Abalone,
    Ailerons,
    Bank,
    Census,
    Pumadyn,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 5] = [
        DatasetKind::Abalone,
        DatasetKind::Ailerons,
        DatasetKind::Bank,
        DatasetKind::Census,
        DatasetKind::Pumadyn,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::Abalone => "abalone",
            DatasetKind::Ailerons => "ailerons",
            DatasetKind::Bank => "bank",
            DatasetKind::Census => "census",
            DatasetKind::Pumadyn => "pumadyn",
        }
    }

    /// Number of input features after preprocessing.
    pub fn features(&self) -> usize {
        match self {
            DatasetKind::Abalone => 7,
            DatasetKind::Ailerons => 40,
            DatasetKind::Bank | DatasetKind::Pumadyn => 32,
            DatasetKind::Census => 16,
        }
    }

    /// Expected sample count; `None` for census, whose file variant varies.
    pub fn rows(&self) -> Option<usize> {
        match self {
            DatasetKind::Abalone => Some(4177),
            DatasetKind::Ailerons => Some(13750),
            DatasetKind::Bank | DatasetKind::Pumadyn => Some(8192),
            DatasetKind::Census => None,
        }
    }

    /// Factor the raw target is multiplied by on load.
    pub fn target_scale(&self) -> f64 {
        match self {
            DatasetKind::Abalone => 1.0,
            DatasetKind::Ailerons => 1e4,
            DatasetKind::Bank => 10.0,
            DatasetKind::Census => 1e-5,
            DatasetKind::Pumadyn => 1e3,
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name())
    }

    pub fn catalog_entry(&self, data_dir: &Path) -> CatalogEntry {
        CatalogEntry {
            path: data_dir.join(self.file_name()),
            target_scale: self.target_scale(),
            rows: self.rows(),
            features: self.features(),
            leading_category: *self == DatasetKind::Abalone,
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::Config(format!("unknown dataset {s:?}")))
    }
}

/// Where a dataset lives and what shape it must have.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub path: PathBuf,
    pub target_scale: f64,
    #[serde(default)]
    pub rows: Option<usize>,
    pub features: usize,
    /// First column is a categorical token from {M, F, I} and is dropped.
    #[serde(default)]
    pub leading_category: bool,
}

/// Maps dataset names to files and expected shapes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub datasets: BTreeMap<String, CatalogEntry>,
}

impl Catalog {
    /// All five datasets as `<name>.csv` inside `data_dir`.
    pub fn builtin(data_dir: &Path) -> Self {
        let datasets = DatasetKind::ALL
            .iter()
            .map(|k| (k.name().to_string(), k.catalog_entry(data_dir)))
            .collect();
        Self { datasets }
    }

    /// Builtin catalog rooted at `$FUZZY_CGAN_DATA`, or `./data`.
    pub fn from_env() -> Self {
        let dir = std::env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("data"));
        Self::builtin(&dir)
    }

    /// Reads a TOML catalog with one `[datasets.<name>]` table per entry.
    /// Relative paths are resolved against the catalog file's directory.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut catalog: Catalog = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for entry in catalog.datasets.values_mut() {
            if entry.path.is_relative() {
                entry.path = base.join(&entry.path);
            }
        }
        Ok(catalog)
    }

    pub fn entry(&self, name: &str) -> Result<&CatalogEntry> {
        self.datasets
            .get(&name.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("dataset {name:?} is not in the catalog")))
    }

    pub fn load(&self, name: &str) -> Result<Dataset> {
        load_dataset(name, self.entry(name)?)
    }
}

/// Features and (scaled) targets in original units.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// `n x d` features.
    pub x: Tensor,
    /// `n x 1` targets, already multiplied by `target_scale`.
    pub y: Tensor,
    pub target_scale: f64,
}

impl Dataset {
    pub fn new(name: impl Into<String>, x: Tensor, y: Tensor, target_scale: f64) -> Result<Self> {
        if y.cols() != 1 || y.rows() != x.rows() {
            return Err(Error::Dimension {
                op: "dataset",
                left: x.shape(),
                right: y.shape(),
            });
        }
        Ok(Self {
            name: name.into(),
            x,
            y,
            target_scale,
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn features(&self) -> usize {
        self.x.cols()
    }
}

pub fn load_dataset(name: &str, entry: &CatalogEntry) -> Result<Dataset> {
    let file = File::open(&entry.path).map_err(|e| Error::io(&entry.path, e))?;
    parse_csv(file, name, &entry.path.display().to_string(), entry)
}

/// Parses comma-separated rows whose last column is the target.
///
/// A first row that does not parse as numbers is taken to be a header.
pub fn parse_csv<R: Read>(reader: R, name: &str, source: &str, entry: &CatalogEntry) -> Result<Dataset> {
    let expected = entry.features + 1 + usize::from(entry.leading_category);
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut first = true;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let is_first = std::mem::take(&mut first);
        if record.len() != expected {
            if is_first && looks_like_header(&record, entry) {
                continue;
            }
            return Err(Error::Schema {
                path: source.to_string(),
                expected,
                actual: record.len(),
                line,
            });
        }
        if is_first && looks_like_header(&record, entry) {
            continue;
        }

        let mut cells = record.iter().enumerate();
        if entry.leading_category {
            let (_, token) = cells.next().expect("record has columns");
            if !ABALONE_SEX_TOKENS.contains(&token) {
                return Err(Error::Parse {
                    path: source.to_string(),
                    row: line,
                    col: 1,
                    value: token.to_string(),
                });
            }
        }
        for (col, cell) in cells {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                path: source.to_string(),
                row: line,
                col: col + 1,
                value: cell.to_string(),
            })?;
            if col + 1 == expected {
                targets.push(value * entry.target_scale);
            } else {
                features.push(value);
            }
        }
    }

    let n = targets.len();
    if let Some(rows) = entry.rows {
        if rows != n {
            return Err(Error::domain(
                "load_dataset",
                format!("{source}: expected {rows} rows, found {n}"),
            ));
        }
    }
    if n == 0 {
        return Err(Error::domain("load_dataset", format!("{source}: no data rows")));
    }
    Dataset::new(
        name,
        Tensor::new(n, entry.features, features)?,
        Tensor::new(n, 1, targets)?,
        entry.target_scale,
    )
}

fn looks_like_header(record: &csv::StringRecord, entry: &CatalogEntry) -> bool {
    let skip = usize::from(entry.leading_category && record.len() > 1);
    record.iter().skip(skip).any(|c| c.parse::<f64>().is_err())
}

/// Seeded shuffled split into `(train, test)` index lists.
pub fn train_test_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::domain(
            "train_test_split",
            format!("fraction {fraction} outside (0, 1)"),
        ));
    }
    let n_train = (n as f64 * fraction).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::domain(
            "train_test_split",
            format!("{n} samples at fraction {fraction} leave an empty split"),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed));
    let test = order.split_off(n_train);
    Ok((order, test))
}

/// Per-column min and max of the training split, in original units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub feature_min: Vec<f64>,
    pub feature_max: Vec<f64>,
    pub target_min: f64,
    pub target_max: f64,
}

fn scale_unit(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (v - min) / (max - min)
    } else {
        0.0
    }
}

impl NormalizationParams {
    pub fn fit(ds: &Dataset, train: &[usize]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::domain("minmax_fit", "empty training split"));
        }
        let x = ds.x.select_rows(train)?;
        let y = ds.y.select_rows(train)?;
        let (feature_min, feature_max) = (0..x.cols())
            .map(|c| min_max(x.column_values(c).into_iter()))
            .unzip();
        let (target_min, target_max) = min_max(y.data().iter().copied());
        Ok(Self {
            feature_min,
            feature_max,
            target_min,
            target_max,
        })
    }

    /// `max - min` of the target column.
    pub fn target_range(&self) -> f64 {
        self.target_max - self.target_min
    }

    /// Maps features into `[0, 1]`; values outside the fitted range clip.
    pub fn normalize_features(&self, x: &Tensor) -> Result<Tensor> {
        if x.cols() != self.feature_min.len() {
            return Err(Error::Dimension {
                op: "normalize_features",
                left: x.shape(),
                right: (1, self.feature_min.len()),
            });
        }
        Ok(Tensor::from_fn(x.rows(), x.cols(), |r, c| {
            scale_unit(x.get(r, c), self.feature_min[c], self.feature_max[c]).clamp(0.0, 1.0)
        }))
    }

    pub fn normalize_target(&self, y: &Tensor) -> Tensor {
        y.map(|v| scale_unit(v, self.target_min, self.target_max).clamp(0.0, 1.0))
    }

    /// `y * (max - min) + min` on the target column.
    pub fn denormalize_target(&self, y: &Tensor) -> Tensor {
        let range = self.target_range();
        y.map(|v| v * range + self.target_min)
    }

    pub fn denormalize_features(&self, x: &Tensor) -> Tensor {
        Tensor::from_fn(x.rows(), x.cols(), |r, c| {
            x.get(r, c) * (self.feature_max[c] - self.feature_min[c]) + self.feature_min[c]
        })
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Min-max scaler that must be fitted before use.
#[derive(Clone, Debug, Default)]
pub struct MinMaxScaler {
    params: Option<NormalizationParams>,
}

impl MinMaxScaler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fit(&mut self, ds: &Dataset, train: &[usize]) -> Result<&NormalizationParams> {
        Ok(self.params.insert(NormalizationParams::fit(ds, train)?))
    }

    pub fn params(&self) -> Result<&NormalizationParams> {
        self.params
            .as_ref()
            .ok_or_else(|| Error::State("min-max scaler has not been fitted".into()))
    }

    pub fn denormalize_target(&self, y: &Tensor) -> Result<Tensor> {
        Ok(self.params()?.denormalize_target(y))
    }
}

/// Normalized train and test splits of one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitData {
    pub train_x: Tensor,
    pub train_y: Tensor,
    pub test_x: Tensor,
    pub test_y: Tensor,
    pub params: NormalizationParams,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl SplitData {
    pub fn features(&self) -> usize {
        self.train_x.cols()
    }
}

/// Fits min-max statistics on `train` and normalizes both splits.
pub fn minmax_fit_apply(ds: &Dataset, train: &[usize], test: &[usize]) -> Result<SplitData> {
    let params = NormalizationParams::fit(ds, train)?;
    let normalize = |idx: &[usize]| -> Result<(Tensor, Tensor)> {
        let x = params.normalize_features(&ds.x.select_rows(idx)?)?;
        let y = params.normalize_target(&ds.y.select_rows(idx)?);
        Ok((x, y))
    };
    let (train_x, train_y) = normalize(train)?;
    let (test_x, test_y) = normalize(test)?;
    Ok(SplitData {
        train_x,
        train_y,
        test_x,
        test_y,
        params,
        train_indices: train.to_vec(),
        test_indices: test.to_vec(),
    })
}

/// Splits with `fraction` and `seed`, then normalizes.
pub fn prepare(ds: &Dataset, fraction: f64, seed: u64) -> Result<SplitData> {
    let (train, test) = train_test_split(ds.len(), fraction, seed)?;
    minmax_fit_apply(ds, &train, &test)
}
