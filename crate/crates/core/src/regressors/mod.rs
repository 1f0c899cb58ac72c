//! Regressors over precomputed kernels.
//!
//! Both kernel models remember the fingerprint of the columns they were
//! trained on and refuse cross kernels built against anything else. A model
//! trained on a transformed kernel therefore only accepts test kernels that
//! went through the same [`FairTransform`](crate::decomposition::FairTransform).

mod krr;
mod svr;

pub use krr::{krr_fit, krr_predict, KrrModel, DEFAULT_KRR_ALPHA, KRR_FORMAT};
pub use svr::{svr_fit, svr_predict, SvrModel, SvrParams, DEFAULT_SVR_TOL, SVR_FORMAT};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};
use crate::kernels::KernelMatrix;
use crate::linalg::Fingerprint;

pub(crate) fn check_prediction_kernel(
    k_cross: &KernelMatrix,
    n_train: usize,
    train_fingerprint: &Fingerprint,
) -> Result<()> {
    ensure_dims(n_train, k_cross.ncols(), "prediction kernel columns")?;
    if k_cross.column_source() != train_fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: train_fingerprint.to_string(),
            found: k_cross.column_source().to_string(),
        });
    }
    Ok(())
}

/// Predicts the training-target mean everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DummyModel {
    pub mean: f64,
}

pub fn dummy_fit(y: &[f64]) -> Result<DummyModel> {
    if y.is_empty() {
        return Err(Error::InvalidInput(
            "dummy model needs at least one target".into(),
        ));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "targets contain non-finite values".into(),
        ));
    }
    Ok(DummyModel {
        mean: y.iter().sum::<f64>() / y.len() as f64,
    })
}

pub fn dummy_predict(model: &DummyModel, count: usize) -> Vec<f64> {
    vec![model.mean; count]
}
