//! Kernel matrices over row-major feature matrices.
//!
//! Square kernels (train × train) are built from the upper triangle and
//! mirrored so they are exactly symmetric. Cross kernels (test × train) share
//! the column provenance of the square kernel built on the same training rows,
//! which is what lets fitted models and fairness transforms reject kernels
//! computed against a different training set.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::linalg::{self, Fingerprint};

/// Default RBF bandwidth.
pub const DEFAULT_GAMMA: f64 = 0.05;

/// Dense `n × d` matrix of finite feature values, one sample per row.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix(DMatrix<f64>);

impl FeatureMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "feature matrix must be at least 1x1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some((idx, _)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (col, row) = (idx / data.nrows(), idx % data.nrows());
            return Err(Error::InvalidInput(format!(
                "non-finite feature value at row {row}, column {col}"
            )));
        }
        Ok(Self(data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
                context: "feature row length",
            });
        }
        Self::new(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        Self::new(self.0.select_rows(indices))
    }

    fn fingerprint(&self, tag: &str) -> Fingerprint {
        Fingerprint::of_matrix(tag, &self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfParams {
    pub gamma: f64,
}

impl RbfParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "rbf gamma must be a positive finite number, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }
}

impl Default for RbfParams {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Square,
    Cross,
}

/// A Gram matrix (`n × n`) or cross kernel (`k × n`) plus the fingerprint of
/// the data its columns were computed against.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    data: DMatrix<f64>,
    kind: KernelKind,
    column_source: Fingerprint,
}

impl KernelMatrix {
    /// Wraps an existing square matrix. Symmetry is required within `1e-10`
    /// relative to the largest entry; the stored matrix is symmetrized.
    pub fn square(mut data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                found: data.ncols(),
                context: "square kernel columns",
            });
        }
        check_finite(&data)?;
        let asym = linalg::max_asymmetry(&data);
        if asym > 1e-10 * linalg::max_abs(&data).max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric(asym));
        }
        linalg::symmetrize(&mut data);
        let column_source = Fingerprint::of_matrix("square", &data);
        Ok(Self {
            data,
            kind: KernelKind::Square,
            column_source,
        })
    }

    /// Wraps a `k × n` cross kernel whose columns correspond to the training
    /// data identified by `column_source`.
    pub fn cross(data: DMatrix<f64>, column_source: Fingerprint) -> Result<Self> {
        check_finite(&data)?;
        Ok(Self {
            data,
            kind: KernelKind::Cross,
            column_source,
        })
    }

    pub(crate) fn from_parts(
        data: DMatrix<f64>,
        kind: KernelKind,
        column_source: Fingerprint,
    ) -> Self {
        Self {
            data,
            kind,
            column_source,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn is_square(&self) -> bool {
        self.kind == KernelKind::Square
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn column_source(&self) -> &Fingerprint {
        &self.column_source
    }

    /// Re-labels the kernel as a cross kernel over the same columns, e.g. to
    /// predict on the training set itself.
    pub fn as_cross(&self) -> KernelMatrix {
        Self {
            data: self.data.clone(),
            kind: KernelKind::Cross,
            column_source: self.column_source.clone(),
        }
    }

    /// Fails unless the kernel is square and PSD within `1e-8 · λ_max`.
    pub fn validate_psd(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::InvalidInput(
                "expected a square kernel matrix".into(),
            ));
        }
        linalg::check_psd(&self.data, 1e-8)
    }
}

fn check_finite(data: &DMatrix<f64>) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(
            "kernel matrix contains non-finite entries".into(),
        ))
    }
}

fn row_sq_norms(x: &DMatrix<f64>) -> Vec<f64> {
    x.row_iter().map(|r| r.norm_squared()).collect()
}

fn rbf_source(x_train: &FeatureMatrix, params: RbfParams) -> Fingerprint {
    x_train.fingerprint("rbf").derive("gamma", &[params.gamma])
}

/// `K_ij = exp(−γ‖x_i − x_j‖²)` over the rows of `x`.
pub fn rbf_kernel(x: &FeatureMatrix, params: RbfParams) -> KernelMatrix {
    let m = x.as_matrix();
    let n = m.nrows();
    let norms = row_sq_norms(m);
    let gram = m * m.transpose();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let d2 = (norms[i] + norms[j] - 2.0 * gram[(i, j)]).max(0.0);
            let v = (-params.gamma * d2).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    KernelMatrix::from_parts(k, KernelKind::Square, rbf_source(x, params))
}

/// Entry `(i, j)` is `k(x_test_i, x_train_j)`.
pub fn rbf_cross_kernel(
    x_test: &FeatureMatrix,
    x_train: &FeatureMatrix,
    params: RbfParams,
) -> Result<KernelMatrix> {
    ensure_dims(
        x_train.ncols(),
        x_test.ncols(),
        "cross kernel feature dimension",
    )?;
    let (a, b) = (x_test.as_matrix(), x_train.as_matrix());
    let na = row_sq_norms(a);
    let nb = row_sq_norms(b);
    let gram = a * b.transpose();
    let k = DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        let d2 = (na[i] + nb[j] - 2.0 * gram[(i, j)]).max(0.0);
        (-params.gamma * d2).exp()
    });
    Ok(KernelMatrix::from_parts(
        k,
        KernelKind::Cross,
        rbf_source(x_train, params),
    ))
}

/// Entry `(i, j)` is `⟨a_i, b_j⟩`. The result is square when `a` and `b` are
/// the same matrix.
pub fn linear_kernel(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<KernelMatrix> {
    ensure_dims(b.ncols(), a.ncols(), "linear kernel feature dimension")?;
    let mut k = a.as_matrix() * b.as_matrix().transpose();
    let source = b.fingerprint("linear");
    if a == b {
        linalg::symmetrize(&mut k);
        Ok(KernelMatrix::from_parts(k, KernelKind::Square, source))
    } else {
        Ok(KernelMatrix::from_parts(k, KernelKind::Cross, source))
    }
}
