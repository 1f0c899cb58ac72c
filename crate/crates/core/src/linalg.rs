//! Small dense linear-algebra helpers shared by the kernel, decomposition and
//! solver modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

use crate::error::{Error, Result};

/// Content hash identifying the data a kernel's columns were built from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fingerprint(String);

impl Fingerprint {
    /// Hashes a tag plus the shape and row-major little-endian bytes of `m`.
    pub fn of_matrix(tag: &str, m: &DMatrix<f64>) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(tag.as_bytes());
        hasher.update((m.nrows() as u64).to_le_bytes());
        hasher.update((m.ncols() as u64).to_le_bytes());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                hasher.update(m[(i, j)].to_le_bytes());
            }
        }
        Self::from_digest(hasher)
    }

    /// Derives a new fingerprint from a parent plus extra labelled parameters.
    pub fn derive(&self, label: &str, params: &[f64]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(self.0.as_bytes());
        hasher.update(label.as_bytes());
        for p in params {
            hasher.update(p.to_le_bytes());
        }
        Self::from_digest(hasher)
    }

    fn from_digest(hasher: Sha256) -> Self {
        let digest = hasher.finalize();
        Self(digest[..16].iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<String> for Fingerprint {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Replaces `m` with `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Largest absolute difference between `m[(i, j)]` and `m[(j, i)]`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// ‖a − b‖_F / max(‖b‖_F, tiny).
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let denom = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / denom
}

/// (min, max) eigenvalue of a symmetric matrix via full eigendecomposition.
pub fn eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Estimate of the spectral radius of a symmetric matrix by power iteration.
pub fn spectral_radius_estimate(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    // Deterministic start vector with no zero entries.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_75).fract());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..200 {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (norm - lambda).abs() <= 1e-10 * norm {
            return norm;
        }
        lambda = norm;
    }
    lambda
}

/// Verifies that a symmetric matrix has no eigenvalue below `-rel_tol · λ_max`.
///
/// Uses a Cholesky factorization of the shifted matrix, which succeeds exactly
/// when every eigenvalue exceeds the negative shift.
pub fn check_psd(m: &DMatrix<f64>, rel_tol: f64) -> Result<()> {
    let n = m.nrows();
    if n == 0 {
        return Ok(());
    }
    let radius = spectral_radius_estimate(m);
    if radius == 0.0 {
        return Ok(());
    }
    let tol = rel_tol * radius;
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] += tol;
    }
    if Cholesky::new(shifted).is_some() {
        return Ok(());
    }
    let (min, max) = eigen_extremes(m);
    let tol = rel_tol * max.max(0.0);
    if min >= -tol {
        Ok(())
    } else {
        Err(Error::NotPositiveSemiDefinite {
            min_eigenvalue: min,
            tolerance: tol,
        })
    }
}

/// Cholesky factor of `m + shift · Id`.
pub fn cholesky_shifted(
    m: &DMatrix<f64>,
    shift: f64,
    what: &'static str,
) -> Result<Cholesky<f64, Dyn>> {
    let mut a = m.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += shift;
    }
    Cholesky::new(a).ok_or(Error::NotPositiveDefinite(what))
}

/// Population standard deviation (divides by `n`).
pub fn population_std(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrize_averages_off_diagonal() {
        let mut m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 3.0]);
        symmetrize(&mut m);
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 3.0]));
        assert_eq!(max_asymmetry(&m), 0.0);
    }

    #[test]
    fn psd_check_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            check_psd(&m, 1e-8),
            Err(Error::NotPositiveSemiDefinite { .. })
        ));
        let psd = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(check_psd(&psd, 1e-8).is_ok());
    }

    #[test]
    fn spectral_radius_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 0.5]));
        assert!((spectral_radius_estimate(&m) - 3.0).abs() < 1e-6);
    }

    #[test]
    fn fingerprint_depends_on_tag_and_content() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let b = DMatrix::from_row_slice(1, 2, &[1.0, 2.5]);
        assert_eq!(
            Fingerprint::of_matrix("x", &a),
            Fingerprint::of_matrix("x", &a)
        );
        assert_ne!(
            Fingerprint::of_matrix("x", &a),
            Fingerprint::of_matrix("y", &a)
        );
        assert_ne!(
            Fingerprint::of_matrix("x", &a),
            Fingerprint::of_matrix("x", &b)
        );
        assert_eq!(Fingerprint::of_matrix("x", &a).as_str().len(), 32);
    }
}
