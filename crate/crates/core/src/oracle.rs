//! Reference implementation of the decomposition in the empirical feature
//! space.
//!
//! The kernel is factored as `K = Q Λ Qᵀ = G Gᵀ` with `G = Q Λ^{1/2}`. Each
//! iteration fits the ridge direction `W = Gᵀ (G Gᵀ + α̃ Id)⁻¹ P`, projects
//! the rows of `G` onto the orthogonal complement of `W`, and the kernel is
//! recovered as `G Gᵀ`. This route shares no code with
//! [`crate::decomposition`] beyond input standardization and is used to
//! check it.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::decomposition::{DecompositionParams, InverseMode, ProtectedAttributes};
use crate::error::{ensure_dims, Error, Result};
use crate::kernels::KernelMatrix;

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const EIGENVALUE_CUTOFF: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct EmpiricalFeatureSpace {
    /// Current projected representation `G_(m)`.
    pub g: DMatrix<f64>,
    /// Eigenvalues of the input kernel, descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, columns ordered like `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    /// Fitted directions, one `n × l` matrix per iteration.
    pub w_history: Vec<DMatrix<f64>>,
    /// Composed projection `Π P^{G_(i)}`.
    pub projection: DMatrix<f64>,
}

impl EmpiricalFeatureSpace {
    /// `G Gᵀ` for the current representation.
    pub fn kernel(&self) -> DMatrix<f64> {
        &self.g * self.g.transpose()
    }
}

/// Factors `K = G Gᵀ` from the symmetric eigendecomposition.
pub fn empirical_feature_space(k: &DMatrix<f64>) -> EmpiricalFeatureSpace {
    empirical_feature_space_with_cutoff(k, EIGENVALUE_CUTOFF)
}

/// As [`empirical_feature_space`] with an explicit relative eigenvalue cutoff.
pub fn empirical_feature_space_with_cutoff(
    k: &DMatrix<f64>,
    rel_cutoff: f64,
) -> EmpiricalFeatureSpace {
    let n = k.nrows();
    let eig = SymmetricEigen::new(k.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = order.first().map_or(0.0, |&i| eig.eigenvalues[i].max(0.0));
    let cutoff = rel_cutoff * lambda_max;

    let eigenvalues: Vec<f64> = order
        .iter()
        .map(|&i| {
            let v = eig.eigenvalues[i];
            if v < cutoff {
                0.0
            } else {
                v
            }
        })
        .collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let g = DMatrix::from_fn(n, n, |r, c| eigenvectors[(r, c)] * eigenvalues[c].sqrt());
    EmpiricalFeatureSpace {
        g,
        eigenvalues,
        eigenvectors,
        w_history: Vec::new(),
        projection: DMatrix::identity(n, n),
    }
}

/// Runs the iteration by explicit null-space projections of `G`.
///
/// Returns `G_(m) G_(m)ᵀ` and the feature-space state.
pub fn oracle_decompose(
    k: &KernelMatrix,
    protected: &ProtectedAttributes,
    params: DecompositionParams,
) -> Result<(KernelMatrix, EmpiricalFeatureSpace)> {
    oracle_decompose_with_cutoff(k, protected, params, EIGENVALUE_CUTOFF)
}

/// As [`oracle_decompose`] with an explicit relative eigenvalue cutoff.
pub fn oracle_decompose_with_cutoff(
    k: &KernelMatrix,
    protected: &ProtectedAttributes,
    params: DecompositionParams,
    rel_cutoff: f64,
) -> Result<(KernelMatrix, EmpiricalFeatureSpace)> {
    if !k.is_square() {
        return Err(Error::InvalidInput(
            "oracle requires a square kernel".into(),
        ));
    }
    if params.inverse_mode != InverseMode::Exact {
        return Err(Error::InvalidInput(
            "oracle route only supports the exact inverse".into(),
        ));
    }
    let n = k.nrows();
    ensure_dims(n, protected.nrows(), "protected attribute rows")?;
    if !(params.ridge_alpha > 0.0) {
        return Err(Error::InvalidInput("ridge alpha must be positive".into()));
    }
    k.validate_psd()?;
    let p = if params.standardize {
        protected.standardized()?
    } else {
        protected.clone()
    };
    let p = p.as_matrix();

    let mut space = empirical_feature_space_with_cutoff(k.matrix(), rel_cutoff);
    for iteration in 1..=params.iterations {
        let gram = &space.g * space.g.transpose();
        let mut reg = gram;
        for i in 0..n {
            reg[(i, i)] += params.ridge_alpha;
        }
        let inv = reg
            .try_inverse()
            .ok_or(Error::NotPositiveDefinite("G Gᵀ + alpha_tilde Id"))?;
        let w = space.g.transpose() * inv * p;
        let wtw = w.transpose() * &w;
        let wtw_inv = wtw
            .clone()
            .try_inverse()
            .filter(|_| wtw.norm() > 0.0)
            .ok_or(Error::DegenerateAttribute {
                iteration,
                reason: "fitted direction is zero".into(),
            })?;
        let projector = DMatrix::identity(n, n) - &w * wtw_inv * w.transpose();
        space.g = &space.g * &projector;
        space.projection = &space.projection * &projector;
        space.w_history.push(w);
    }
    let recovered = KernelMatrix::square(space.kernel())?;
    Ok((recovered, space))
}
