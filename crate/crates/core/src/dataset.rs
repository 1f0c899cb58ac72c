//! Tabular data ingestion, standardization and fold plans.

use std::collections::HashSet;
use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::ProtectedAttributes;
use crate::error::{ensure_dims, Error, Result};
use crate::kernels::FeatureMatrix;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureColumns {
    /// Every column that is neither the target nor protected.
    #[default]
    AllRemaining,
    List(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub target_column: String,
    pub protected_columns: Vec<String>,
    #[serde(default)]
    pub feature_columns: FeatureColumns,
    #[serde(default = "default_missing_marker")]
    pub missing_marker: String,
    #[serde(default = "default_true")]
    pub has_header: bool,
    /// Keep protected columns among the features (ablations only).
    #[serde(default)]
    pub include_protected: bool,
}

fn default_missing_marker() -> String {
    "?".into()
}

fn default_true() -> bool {
    true
}

impl DatasetSpec {
    pub fn new(path: impl Into<PathBuf>, target: &str, protected: &[&str]) -> Self {
        Self {
            path: path.into(),
            target_column: target.into(),
            protected_columns: protected.iter().map(|s| s.to_string()).collect(),
            feature_columns: FeatureColumns::AllRemaining,
            missing_marker: default_missing_marker(),
            has_header: true,
            include_protected: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.protected_columns.is_empty() {
            return Err(Error::Config(
                "at least one protected column is required".into(),
            ));
        }
        if self.protected_columns.contains(&self.target_column) {
            return Err(Error::Config(format!(
                "target column {:?} is also listed as protected",
                self.target_column
            )));
        }
        Ok(())
    }
}

/// Per-column `(mean, std)` fitted on one matrix, ignoring NaN entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardization {
    /// Population statistics per column. Missing entries (NaN) are skipped;
    /// an entirely missing or constant column gets `std = 0`.
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let mut means = Vec::with_capacity(x.ncols());
        let mut stds = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let present: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
            if present.is_empty() {
                means.push(0.0);
                stds.push(0.0);
                continue;
            }
            let mean = present.iter().sum::<f64>() / present.len() as f64;
            let var =
                present.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / present.len() as f64;
            means.push(mean);
            stds.push(var.sqrt());
        }
        Self { means, stds }
    }

    pub fn ncols(&self) -> usize {
        self.means.len()
    }

    /// Indices of columns with zero spread.
    pub fn constant_columns(&self) -> Vec<usize> {
        (0..self.ncols())
            .filter(|&j| !(self.stds[j] > 0.0))
            .collect()
    }

    /// Inverse of [`standardize_apply`].
    pub fn invert(&self, z: &FeatureMatrix) -> Result<DMatrix<f64>> {
        ensure_dims(self.ncols(), z.ncols(), "standardization columns")?;
        let z = z.as_matrix();
        Ok(DMatrix::from_fn(z.nrows(), z.ncols(), |i, j| {
            z[(i, j)] * self.scale(j) + self.means[j]
        }))
    }

    fn scale(&self, j: usize) -> f64 {
        if self.stds[j] > 0.0 {
            self.stds[j]
        } else {
            1.0
        }
    }
}

/// `(x − mean) / std` per column with the given statistics. Missing entries
/// take the column mean, i.e. become 0. Constant columns are only centered.
pub fn standardize_apply(stats: &Standardization, x: &DMatrix<f64>) -> Result<FeatureMatrix> {
    ensure_dims(stats.ncols(), x.ncols(), "standardization columns")?;
    let out = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        let v = x[(i, j)];
        if v.is_nan() {
            0.0
        } else {
            (v - stats.means[j]) / stats.scale(j)
        }
    });
    FeatureMatrix::new(out)
}

/// A loaded table. Features are kept raw (NaN where missing) so that each
/// fold can be standardized on its own training rows.
#[derive(Clone, Debug)]
pub struct TabularDataset {
    pub raw_features: DMatrix<f64>,
    pub feature_names: Vec<String>,
    pub y: Vec<f64>,
    pub protected: ProtectedAttributes,
    pub protected_names: Vec<String>,
    /// Statistics over all rows, as used by [`TabularDataset::features`].
    pub standardization: Standardization,
    pub warnings: Vec<String>,
}

impl TabularDataset {
    /// Builds a dataset from in-memory columns, dropping constant features.
    pub fn from_parts(
        raw_features: DMatrix<f64>,
        feature_names: Vec<String>,
        y: Vec<f64>,
        protected: ProtectedAttributes,
        protected_names: Vec<String>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Dataset("dataset has no rows".into()));
        }
        ensure_dims(n, raw_features.nrows(), "feature rows")?;
        ensure_dims(n, protected.nrows(), "protected rows")?;
        ensure_dims(raw_features.ncols(), feature_names.len(), "feature names")?;
        ensure_dims(protected.ncols(), protected_names.len(), "protected names")?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dataset("targets contain non-finite values".into()));
        }
        if raw_features.iter().any(|v| v.is_infinite()) {
            return Err(Error::Dataset("features contain infinite values".into()));
        }

        let mut warnings = Vec::new();
        let stats = Standardization::fit(&raw_features);
        let dropped: HashSet<usize> = stats.constant_columns().into_iter().collect();
        for &j in &dropped {
            warnings.push(format!(
                "dropped zero-variance feature column {:?}",
                feature_names[j]
            ));
        }
        warnings.sort();
        let keep: Vec<usize> = (0..raw_features.ncols())
            .filter(|j| !dropped.contains(j))
            .collect();
        if keep.is_empty() {
            return Err(Error::Dataset(
                "no feature column has positive variance".into(),
            ));
        }
        let raw_features = raw_features.select_columns(&keep);
        let feature_names = keep.iter().map(|&j| feature_names[j].clone()).collect();
        let standardization = Standardization::fit(&raw_features);
        Ok(Self {
            raw_features,
            feature_names,
            y,
            protected,
            protected_names,
            standardization,
            warnings,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// All rows standardized with whole-dataset statistics.
    pub fn features(&self) -> FeatureMatrix {
        standardize_apply(&self.standardization, &self.raw_features)
            .expect("statistics were fitted on these columns")
    }

    /// Standardized `(train, test)` features using training statistics only.
    pub fn split_features(
        &self,
        train: &[usize],
        test: &[usize],
    ) -> Result<(FeatureMatrix, FeatureMatrix)> {
        let train_raw = self.raw_features.select_rows(train);
        let stats = Standardization::fit(&train_raw);
        Ok((
            standardize_apply(&stats, &train_raw)?,
            standardize_apply(&stats, &self.raw_features.select_rows(test))?,
        ))
    }

    pub fn select_y(&self, rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&i| self.y[i]).collect()
    }
}

fn parse_cell(cell: &str, marker: &str, row: usize, column: &str) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell == marker || cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>().map(Some).map_err(|_| {
        Error::Dataset(format!(
            "row {row}, column {column:?}: cannot parse {cell:?} as a number"
        ))
    })
}

/// Reads a CSV file per `spec`.
///
/// Rows missing the target or a protected value are dropped; missing feature
/// cells are kept as NaN and later imputed with the column mean.
pub fn load_csv(spec: &DatasetSpec) -> Result<TabularDataset> {
    spec.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(spec.has_header)
        .trim(csv::Trim::All)
        .from_path(&spec.path)
        .map_err(|e| Error::Dataset(format!("cannot open {}: {e}", spec.path.display())))?;

    let mut records = Vec::new();
    for record in reader.records() {
        records.push(record?);
    }
    let width = match (spec.has_header, records.first()) {
        (true, _) => reader.headers()?.len(),
        (false, Some(r)) => r.len(),
        (false, None) => 0,
    };
    let names: Vec<String> = if spec.has_header {
        reader.headers()?.iter().map(str::to_string).collect()
    } else {
        (0..width).map(|j| j.to_string()).collect()
    };
    let index_of = |name: &str| -> Result<usize> {
        names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Dataset(format!("column {name:?} not found")))
    };

    let target = index_of(&spec.target_column)?;
    let protected: Vec<usize> = spec
        .protected_columns
        .iter()
        .map(|c| index_of(c))
        .collect::<Result<_>>()?;
    let features: Vec<usize> = match &spec.feature_columns {
        FeatureColumns::List(cols) => cols.iter().map(|c| index_of(c)).collect::<Result<_>>()?,
        FeatureColumns::AllRemaining => (0..width)
            .filter(|&j| j != target && (spec.include_protected || !protected.contains(&j)))
            .collect(),
    };
    if features.contains(&target) {
        return Err(Error::Config("target column cannot be a feature".into()));
    }
    if features.is_empty() {
        return Err(Error::Dataset("no feature columns selected".into()));
    }

    let mut y = Vec::new();
    let mut p_rows: Vec<Vec<f64>> = Vec::new();
    let mut x_rows: Vec<Vec<f64>> = Vec::new();
    let mut dropped = 0usize;
    for (r, record) in records.iter().enumerate() {
        if record.len() != width {
            return Err(Error::Dataset(format!(
                "row {r} has {} fields, expected {width}",
                record.len()
            )));
        }
        let marker = spec.missing_marker.as_str();
        let target_value = parse_cell(&record[target], marker, r, &names[target])?;
        let protected_values = protected
            .iter()
            .map(|&j| parse_cell(&record[j], marker, r, &names[j]))
            .collect::<Result<Vec<_>>>()?;
        let (Some(t), Some(pv)) = (
            target_value,
            protected_values.into_iter().collect::<Option<Vec<f64>>>(),
        ) else {
            dropped += 1;
            continue;
        };
        let xv = features
            .iter()
            .map(|&j| parse_cell(&record[j], marker, r, &names[j]).map(|v| v.unwrap_or(f64::NAN)))
            .collect::<Result<Vec<_>>>()?;
        y.push(t);
        p_rows.push(pv);
        x_rows.push(xv);
    }
    if y.is_empty() {
        return Err(Error::Dataset(format!(
            "{} has no usable rows",
            spec.path.display()
        )));
    }

    let n = y.len();
    let raw = DMatrix::from_fn(n, features.len(), |i, j| x_rows[i][j]);
    let p = ProtectedAttributes::new(DMatrix::from_fn(n, protected.len(), |i, j| p_rows[i][j]))?;
    let mut dataset = TabularDataset::from_parts(
        raw,
        features.iter().map(|&j| names[j].clone()).collect(),
        y,
        p,
        spec.protected_columns.clone(),
    )?;
    if dropped > 0 {
        dataset.warnings.insert(
            0,
            format!("dropped {dropped} rows with missing target or protected values"),
        );
    }
    Ok(dataset)
}

/// Balanced shuffled assignment of `n` rows to `k` folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }
}

pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::Config(format!("{k} folds requested for {n} rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; n];
    for (position, &row) in order.iter().enumerate() {
        assignments[row] = position % k;
    }
    Ok(FoldPlan {
        k,
        seed,
        assignments,
    })
}
