use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};

use crate::container;
use crate::error::{ensure_dims, Error, Result};
use crate::kernels::KernelMatrix;
use crate::linalg::{self, Fingerprint};

use super::check_prediction_kernel;

/// Default KRR penalty.
pub const DEFAULT_KRR_ALPHA: f64 = 0.25;

/// Kernel ridge regression over a precomputed kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct KrrModel {
    dual_coefficients: DVector<f64>,
    alpha: f64,
    train_fingerprint: Fingerprint,
}

impl KrrModel {
    pub fn dual_coefficients(&self) -> &DVector<f64> {
        &self.dual_coefficients
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn train_fingerprint(&self) -> &Fingerprint {
        &self.train_fingerprint
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut header = Map::new();
        header.insert("alpha".into(), Value::from(self.alpha));
        header.insert(
            "train_fingerprint".into(),
            Value::from(self.train_fingerprint.as_str()),
        );
        let coefs = DMatrix::from_column_slice(
            self.dual_coefficients.len(),
            1,
            self.dual_coefficients.as_slice(),
        );
        container::write_container(out, KRR_FORMAT, header, &coefs)
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let (header, coefs) = container::read_container(input, KRR_FORMAT)?;
        ensure_dims(1, coefs.ncols(), "krr coefficient columns")?;
        Ok(Self {
            dual_coefficients: coefs.column(0).into_owned(),
            alpha: container::header_f64(&header, "alpha")?,
            train_fingerprint: container::header_str(&header, "train_fingerprint")?
                .to_string()
                .into(),
        })
    }
}

pub const KRR_FORMAT: &str = "krr-model";

/// Solves `(K + αId) c = y` by Cholesky factorization.
pub fn krr_fit(k_train: &KernelMatrix, y: &[f64], alpha: f64) -> Result<KrrModel> {
    if !k_train.is_square() {
        return Err(Error::InvalidInput(
            "krr needs a square training kernel".into(),
        ));
    }
    ensure_dims(k_train.nrows(), y.len(), "krr targets")?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidInput(format!(
            "krr alpha must be positive, got {alpha}"
        )));
    }
    let chol = linalg::cholesky_shifted(k_train.matrix(), alpha, "K + alpha Id")?;
    let coefs = chol.solve(&DVector::from_column_slice(y));
    Ok(KrrModel {
        dual_coefficients: coefs,
        alpha,
        train_fingerprint: k_train.column_source().clone(),
    })
}

/// `ŷ = K_cross c`.
pub fn krr_predict(model: &KrrModel, k_cross: &KernelMatrix) -> Result<Vec<f64>> {
    check_prediction_kernel(
        k_cross,
        model.dual_coefficients.len(),
        &model.train_fingerprint,
    )?;
    Ok((k_cross.matrix() * &model.dual_coefficients)
        .iter()
        .copied()
        .collect())
}
