//! Cross-validated experiments over a sweep of iteration counts.
//!
//! For every fold the training kernel is decomposed once; larger `m` values
//! continue from smaller ones. Each `(fold, m)` pair produces one prediction
//! vector that every metric scores.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{kfold, load_csv, DatasetSpec, TabularDataset};
use crate::decomposition::{
    apply_transform, Decomposer, DecompositionParams, InverseMode, TransformStorage,
    DEFAULT_RIDGE_ALPHA_KRR, DEFAULT_RIDGE_ALPHA_SVR,
};
use crate::error::{Error, Result};
use crate::kernels::{rbf_cross_kernel, rbf_kernel, KernelMatrix, RbfParams, DEFAULT_GAMMA};
use crate::linalg;
use crate::metrics::{evaluate, KdeParams, MetricReport};
use crate::regressors::{
    dummy_fit, dummy_predict, krr_fit, krr_predict, svr_fit, svr_predict, SvrParams,
    DEFAULT_KRR_ALPHA, DEFAULT_SVR_TOL,
};
use crate::synthetic::{self, SyntheticSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv(DatasetSpec),
    Synthetic(SyntheticSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<TabularDataset> {
        match self {
            DataSource::Csv(spec) => load_csv(spec),
            DataSource::Synthetic(spec) => synthetic::generate(spec),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelConfig {
    Krr {
        #[serde(default = "default_krr_alpha")]
        alpha: f64,
    },
    Svr {
        epsilon: f64,
        #[serde(rename = "C")]
        c: f64,
        #[serde(default = "default_svr_tol")]
        tol: f64,
    },
    Dummy,
}

fn default_krr_alpha() -> f64 {
    DEFAULT_KRR_ALPHA
}
fn default_svr_tol() -> f64 {
    DEFAULT_SVR_TOL
}

impl ModelConfig {
    fn default_alpha_tilde(&self) -> f64 {
        match self {
            ModelConfig::Svr { .. } => DEFAULT_RIDGE_ALPHA_SVR,
            _ => DEFAULT_RIDGE_ALPHA_KRR,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ModelConfig::Krr { alpha } if !(alpha.is_finite() && alpha > 0.0) => Err(
                Error::Config(format!("krr alpha must be positive, got {alpha}")),
            ),
            ModelConfig::Svr { epsilon, c, tol } => SvrParams::new(epsilon, c)
                .with_tol(tol)
                .validate()
                .map_err(|e| Error::Config(e.to_string())),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelConfig {
    Rbf {
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig::Rbf {
            gamma: DEFAULT_GAMMA,
        }
    }
}

/// Inverse used by the decomposition. Landmark counts are given as a fraction
/// of the training fold; seeds derive from the cv seed and fold index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InverseConfig {
    #[default]
    Exact,
    Nystroem {
        landmark_fraction: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionConfig {
    /// Defaults to 0.1 for KRR and dummy models, 0.05 for SVR.
    #[serde(default)]
    pub alpha_tilde: Option<f64>,
    pub m_values: Vec<usize>,
    #[serde(default)]
    pub inverse_mode: InverseConfig,
    #[serde(default = "default_true")]
    pub standardize_protected: bool,
    #[serde(default)]
    pub storage: TransformStorage,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    5
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { k: 5, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricsConfig {
    #[serde(default)]
    pub kde: KdeParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dataset: DataSource,
    pub model: ModelConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    pub decomposition: DecompositionConfig,
    #[serde(default)]
    pub cv: CvConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    /// Wall-clock timings vary between runs, so they are off by default to
    /// keep output files byte-identical.
    #[serde(default)]
    pub record_timings: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn alpha_tilde(&self) -> f64 {
        self.decomposition
            .alpha_tilde
            .unwrap_or_else(|| self.model.default_alpha_tilde())
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.decomposition.m_values;
        if m.is_empty() {
            return Err(Error::Config("m_values must not be empty".into()));
        }
        if m.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("m_values must be strictly ascending".into()));
        }
        let alpha = self.alpha_tilde();
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Config(format!(
                "alpha_tilde must be positive, got {alpha}"
            )));
        }
        let KernelConfig::Rbf { gamma } = self.kernel;
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Config(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if let InverseConfig::Nystroem { landmark_fraction } = self.decomposition.inverse_mode {
            if !(landmark_fraction > 0.0 && landmark_fraction <= 1.0) {
                return Err(Error::Config(format!(
                    "landmark fraction must lie in (0, 1], got {landmark_fraction}"
                )));
            }
        }
        if self.cv.k < 2 {
            return Err(Error::Config(format!(
                "cv.k must be at least 2, got {}",
                self.cv.k
            )));
        }
        self.model.validate()?;
        self.metrics
            .kde
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        match &self.dataset {
            DataSource::Csv(spec) => spec.validate(),
            DataSource::Synthetic(spec) => spec.validate(),
        }
    }
}

/// Scores of one fold at one iteration count, one report per protected
/// attribute (all from the same predictions).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub m: usize,
    /// Iterations actually applied; smaller than `m` once the protected
    /// information is exhausted.
    pub effective_m: usize,
    pub reports: Vec<MetricReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub m: usize,
    pub metrics: Vec<MetricSummary>,
}

impl Aggregate {
    pub fn get(&self, metric: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|s| s.metric == metric)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub fold: usize,
    pub kernel_ms: f64,
    pub decompose_ms: f64,
    pub fit_ms: f64,
    pub predict_ms: f64,
    pub metrics_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub protected_names: Vec<String>,
    pub sample_count: usize,
    pub folds: Vec<FoldRecord>,
    pub aggregates: Vec<Aggregate>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<Vec<PhaseTimings>>,
}

impl ExperimentResult {
    pub fn aggregate(&self, m: usize) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.m == m)
    }

    /// `mean` of `metric` for every m, in m order.
    pub fn means(&self, metric: &str) -> Vec<f64> {
        self.aggregates
            .iter()
            .map(|a| a.get(metric).map_or(f64::NAN, |s| s.mean))
            .collect()
    }
}

/// Names of the aggregated metrics. Fairness metrics get the attribute name
/// appended when there is more than one protected attribute.
pub fn metric_names(protected_names: &[String]) -> Vec<String> {
    let mut names = vec!["mae".to_string()];
    for metric in &MetricReport::NAMES[1..] {
        if protected_names.len() == 1 {
            names.push(metric.to_string());
        } else {
            names.extend(protected_names.iter().map(|p| format!("{metric}[{p}]")));
        }
    }
    names
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads for the fold loop; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Write every `FairTransform` here as `transform_fold{f}_m{m}.fkt`.
    pub transform_dir: Option<PathBuf>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with(config, &RunOptions::default())
}

pub fn run_experiment_with(
    config: &ExperimentConfig,
    options: &RunOptions,
) -> Result<ExperimentResult> {
    config.validate()?;
    let data = config.dataset.load()?;
    run_on_dataset(config, &data, options)
}

fn derived_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

struct FoldOutput {
    records: Vec<FoldRecord>,
    warnings: Vec<String>,
    timings: PhaseTimings,
}

/// Runs the protocol on an already loaded dataset.
pub fn run_on_dataset(
    config: &ExperimentConfig,
    data: &TabularDataset,
    options: &RunOptions,
) -> Result<ExperimentResult> {
    config.validate()?;
    let plan = kfold(data.len(), config.cv.k, config.cv.seed)?;
    if let Some(dir) = &options.transform_dir {
        fs::create_dir_all(dir)?;
    }
    let run_fold = |fold: usize| {
        run_fold(
            config,
            data,
            &plan.train_indices(fold),
            &plan.test_indices(fold),
            fold,
            options,
        )
    };
    let outputs: Vec<Result<FoldOutput>> = match options.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
            .install(|| (0..plan.k).into_par_iter().map(run_fold).collect()),
        None => (0..plan.k).into_par_iter().map(run_fold).collect(),
    };

    let mut folds = Vec::new();
    let mut warnings = data.warnings.clone();
    let mut timings = Vec::new();
    for output in outputs {
        let output = output?;
        folds.extend(output.records);
        warnings.extend(output.warnings);
        timings.push(output.timings);
    }
    let names = metric_names(&data.protected_names);
    let aggregates = config
        .decomposition
        .m_values
        .iter()
        .map(|&m| aggregate(m, &folds, &names))
        .collect();
    Ok(ExperimentResult {
        config: config.clone(),
        protected_names: data.protected_names.clone(),
        sample_count: data.len(),
        folds,
        aggregates,
        warnings,
        runtime_ms: config.record_timings.then_some(timings),
    })
}

fn flatten(record: &FoldRecord) -> Vec<f64> {
    let mut values = vec![record.reports[0].mae];
    for metric in &MetricReport::NAMES[1..] {
        values.extend(
            record
                .reports
                .iter()
                .map(|r| r.get(metric).expect("known metric")),
        );
    }
    values
}

fn aggregate(m: usize, folds: &[FoldRecord], names: &[String]) -> Aggregate {
    let rows: Vec<Vec<f64>> = folds.iter().filter(|r| r.m == m).map(flatten).collect();
    let metrics = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            MetricSummary {
                metric: name.clone(),
                mean: column.iter().sum::<f64>() / column.len() as f64,
                std: linalg::population_std(&column),
            }
        })
        .collect();
    Aggregate { m, metrics }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn run_fold(
    config: &ExperimentConfig,
    data: &TabularDataset,
    train: &[usize],
    test: &[usize],
    fold: usize,
    options: &RunOptions,
) -> Result<FoldOutput> {
    let annotate = |m: usize| {
        move |e: Error| Error::Experiment {
            fold,
            m,
            source: Box::new(e),
        }
    };
    let first_m = config.decomposition.m_values[0];
    let mut timings = PhaseTimings {
        fold,
        kernel_ms: 0.0,
        decompose_ms: 0.0,
        fit_ms: 0.0,
        predict_ms: 0.0,
        metrics_ms: 0.0,
    };
    let mut warnings = Vec::new();

    let y_train = data.select_y(train);
    let y_test = data.select_y(test);
    let p_train = data
        .protected
        .select_rows(train)
        .map_err(annotate(first_m))?;
    let p_test = data
        .protected
        .select_rows(test)
        .map_err(annotate(first_m))?;
    let kde = config.metrics.kde;
    let score = |yhat: &[f64], m: usize| -> Result<Vec<MetricReport>> {
        (0..p_test.ncols())
            .map(|j| evaluate(&y_test, yhat, &p_test.column(j), &kde))
            .collect::<Result<_>>()
            .map_err(annotate(m))
    };

    if let ModelConfig::Dummy = config.model {
        let start = Instant::now();
        let model = dummy_fit(&y_train).map_err(annotate(first_m))?;
        timings.fit_ms = elapsed_ms(start);
        let yhat = dummy_predict(&model, test.len());
        let start = Instant::now();
        let reports = score(&yhat, first_m)?;
        timings.metrics_ms = elapsed_ms(start);
        let records = config
            .decomposition
            .m_values
            .iter()
            .map(|&m| FoldRecord {
                fold,
                m,
                effective_m: 0,
                reports: reports.clone(),
            })
            .collect();
        return Ok(FoldOutput {
            records,
            warnings,
            timings,
        });
    }

    let start = Instant::now();
    let (x_train, x_test) = data
        .split_features(train, test)
        .map_err(annotate(first_m))?;
    let KernelConfig::Rbf { gamma } = config.kernel;
    let rbf = RbfParams::new(gamma)?;
    let k_train = rbf_kernel(&x_train, rbf);
    let k_cross = rbf_cross_kernel(&x_test, &x_train, rbf).map_err(annotate(first_m))?;
    timings.kernel_ms = elapsed_ms(start);

    let params = decomposition_params(config, train.len(), fold);
    let mut decomposer = Decomposer::new(&k_train, &p_train, params).map_err(annotate(first_m))?;
    let mut exhausted = false;
    let mut records = Vec::new();

    for &m in &config.decomposition.m_values {
        let start = Instant::now();
        while !exhausted && decomposer.iteration() < m {
            match decomposer.step() {
                Ok(_) => {}
                Err(Error::DegenerateAttribute { iteration, .. })
                | Err(Error::CollinearAttributes { iteration }) => {
                    exhausted = true;
                    warnings.push(format!(
                        "fold {fold}: protected information exhausted at iteration {iteration}; \
                         larger m reuse K_({})",
                        iteration - 1
                    ));
                }
                Err(e) => return Err(annotate(m)(e)),
            }
        }
        let transform = decomposer.transform();
        let k_m = decomposer.kernel();
        let k_cross_m = apply_transform(&k_cross, &transform).map_err(annotate(m))?;
        timings.decompose_ms += elapsed_ms(start);
        if let Some(dir) = &options.transform_dir {
            let path = dir.join(format!("transform_fold{fold}_m{m}.fkt"));
            let mut out = BufWriter::new(fs::File::create(path)?);
            transform.write_to(&mut out)?;
            out.flush()?;
        }

        let start = Instant::now();
        let yhat = fit_predict(
            config.model,
            &k_m,
            &k_cross_m,
            &y_train,
            &mut timings,
            start,
        )
        .map_err(annotate(m))?;
        let start = Instant::now();
        let reports = score(&yhat, m)?;
        timings.metrics_ms += elapsed_ms(start);
        records.push(FoldRecord {
            fold,
            m,
            effective_m: decomposer.iteration(),
            reports,
        });
    }
    Ok(FoldOutput {
        records,
        warnings,
        timings,
    })
}

fn fit_predict(
    model: ModelConfig,
    k_train: &KernelMatrix,
    k_cross: &KernelMatrix,
    y_train: &[f64],
    timings: &mut PhaseTimings,
    start: Instant,
) -> Result<Vec<f64>> {
    match model {
        ModelConfig::Krr { alpha } => {
            let fitted = krr_fit(k_train, y_train, alpha)?;
            timings.fit_ms += elapsed_ms(start);
            let start = Instant::now();
            let yhat = krr_predict(&fitted, k_cross)?;
            timings.predict_ms += elapsed_ms(start);
            Ok(yhat)
        }
        ModelConfig::Svr { epsilon, c, tol } => {
            let fitted = svr_fit(k_train, y_train, SvrParams::new(epsilon, c).with_tol(tol))?;
            timings.fit_ms += elapsed_ms(start);
            let start = Instant::now();
            let yhat = svr_predict(&fitted, k_cross)?;
            timings.predict_ms += elapsed_ms(start);
            Ok(yhat)
        }
        ModelConfig::Dummy => unreachable!("dummy model never reaches kernel fitting"),
    }
}

fn decomposition_params(
    config: &ExperimentConfig,
    n_train: usize,
    fold: usize,
) -> DecompositionParams {
    let inverse_mode = match config.decomposition.inverse_mode {
        InverseConfig::Exact => InverseMode::Exact,
        InverseConfig::Nystroem { landmark_fraction } => InverseMode::Nystroem {
            landmark_count: landmark_count(landmark_fraction, n_train),
            seed: derived_seed(config.cv.seed, fold as u64 + 1),
        },
    };
    DecompositionParams::new(0, config.alpha_tilde())
        .with_inverse_mode(inverse_mode)
        .with_standardize(config.decomposition.standardize_protected)
        .with_storage(config.decomposition.storage)
}

/// `ceil(fraction · n)`, clamped to `[1, n]`.
pub fn landmark_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).ceil() as usize).clamp(1, n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: f64,
    pub result: ExperimentResult,
}

/// Difference of an entry's mean from the reference mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepDelta {
    pub value: f64,
    pub m: usize,
    pub metric: String,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: String,
    pub entries: Vec<SweepEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ExperimentResult>,
    #[serde(default)]
    pub deltas: Vec<SweepDelta>,
}

fn check_sweep_values(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Config(format!("{what} list must not be empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{what} values must be finite")));
    }
    Ok(())
}

/// One experiment per `α̃`, all other settings fixed.
pub fn sweep_alpha_tilde(
    config: &ExperimentConfig,
    alpha_values: &[f64],
    options: &RunOptions,
) -> Result<SweepResult> {
    check_sweep_values(alpha_values, "alpha_tilde")?;
    config.validate()?;
    let data = config.dataset.load()?;
    let entries = alpha_values
        .iter()
        .map(|&value| {
            let mut c = config.clone();
            c.decomposition.alpha_tilde = Some(value);
            Ok(SweepEntry {
                value,
                result: run_on_dataset(&c, &data, options)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        parameter: "alpha_tilde".into(),
        entries,
        reference: None,
        deltas: Vec::new(),
    })
}

/// One experiment per landmark fraction plus an exact-inverse reference.
pub fn sweep_nystroem(
    config: &ExperimentConfig,
    fractions: &[f64],
    options: &RunOptions,
) -> Result<SweepResult> {
    check_sweep_values(fractions, "landmark fraction")?;
    if let Some(f) = fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::Config(format!(
            "landmark fraction must lie in (0, 1], got {f}"
        )));
    }
    config.validate()?;
    let data = config.dataset.load()?;
    let mut exact = config.clone();
    exact.decomposition.inverse_mode = InverseConfig::Exact;
    let reference = run_on_dataset(&exact, &data, options)?;

    let mut entries = Vec::new();
    let mut deltas = Vec::new();
    for &value in fractions {
        let mut c = config.clone();
        c.decomposition.inverse_mode = InverseConfig::Nystroem {
            landmark_fraction: value,
        };
        let result = run_on_dataset(&c, &data, options)?;
        for (agg, base) in result.aggregates.iter().zip(&reference.aggregates) {
            for (s, b) in agg.metrics.iter().zip(&base.metrics) {
                deltas.push(SweepDelta {
                    value,
                    m: agg.m,
                    metric: s.metric.clone(),
                    delta: s.mean - b.mean,
                });
            }
        }
        entries.push(SweepEntry { value, result });
    }
    Ok(SweepResult {
        parameter: "landmark_fraction".into(),
        entries,
        reference: Some(reference),
        deltas,
    })
}

pub const RESULT_JSON: &str = "result.json";
pub const RESULT_CSV: &str = "summary.csv";
pub const SWEEP_JSON: &str = "sweep.json";
pub const SWEEP_CSV: &str = "sweep.csv";

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Writes `result.json` (full detail) and `summary.csv` (`m,metric,mean,std`)
/// into `dir`. Returns the two paths.
pub fn emit_results(result: &ExperimentResult, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let json = dir.join(RESULT_JSON);
    write_json(result, &json)?;
    let csv_path = dir.join(RESULT_CSV);
    let mut writer = csv::Writer::from_path(&csv_path)?;
    writer.write_record(["m", "metric", "mean", "std"])?;
    for agg in &result.aggregates {
        for s in &agg.metrics {
            writer.write_record([
                agg.m.to_string(),
                s.metric.clone(),
                s.mean.to_string(),
                s.std.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok((json, csv_path))
}

/// Writes `sweep.json` and `sweep.csv` (`value,m,metric,mean,std,delta`);
/// `delta` is empty for sweeps without a reference.
pub fn emit_sweep(sweep: &SweepResult, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let json = dir.join(SWEEP_JSON);
    write_json(sweep, &json)?;
    let csv_path = dir.join(SWEEP_CSV);
    let mut writer = csv::Writer::from_path(&csv_path)?;
    writer.write_record([&sweep.parameter, "m", "metric", "mean", "std", "delta"])?;
    for entry in &sweep.entries {
        for agg in &entry.result.aggregates {
            for s in &agg.metrics {
                let delta = sweep
                    .deltas
                    .iter()
                    .find(|d| d.value == entry.value && d.m == agg.m && d.metric == s.metric)
                    .map_or(String::new(), |d| d.delta.to_string());
                writer.write_record([
                    entry.value.to_string(),
                    agg.m.to_string(),
                    s.metric.clone(),
                    s.mean.to_string(),
                    s.std.to_string(),
                    delta,
                ])?;
            }
        }
    }
    writer.flush()?;
    Ok((json, csv_path))
}
