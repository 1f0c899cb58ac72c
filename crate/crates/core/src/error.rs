use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("kernel fingerprint mismatch: expected {expected}, found {found}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("kernel matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:.3e}, tolerance {tolerance:.3e})")]
    NotPositiveSemiDefinite { min_eigenvalue: f64, tolerance: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error(
        "protected attribute carries no removable information at iteration {iteration}: {reason}"
    )]
    DegenerateAttribute { iteration: usize, reason: String },

    #[error("protected attributes are collinear at iteration {iteration}; the normalization matrix is singular")]
    CollinearAttributes { iteration: usize },

    #[error("nystroem inner matrix is singular with {landmarks} landmarks; use more or different landmarks")]
    LandmarkDegeneracy { landmarks: usize },

    #[error("linear system ({0}) is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error(
        "svr solver did not converge after {iterations} iterations (best duality gap {gap:.3e})"
    )]
    NonConvergence { iterations: usize, gap: f64 },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("fold {fold}, m = {m}: {source}")]
    Experiment {
        fold: usize,
        m: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short stable identifier, used for machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::FingerprintMismatch { .. } => "fingerprint_mismatch",
            Error::NotPositiveSemiDefinite { .. } => "not_psd",
            Error::NotSymmetric(_) => "not_symmetric",
            Error::DegenerateAttribute { .. } => "degenerate_attribute",
            Error::CollinearAttributes { .. } => "collinear_attributes",
            Error::LandmarkDegeneracy { .. } => "landmark_degeneracy",
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Dataset(_) => "dataset",
            Error::Config(_) => "config",
            Error::Experiment { source, .. } => source.kind(),
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn ensure_dims(expected: usize, found: usize, context: &'static str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            found,
            context,
        })
    }
}
