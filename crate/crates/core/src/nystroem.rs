//! Landmark (Nystroem) approximation of the regularized kernel inverse.
//!
//! With `p` sampled landmark columns, `K ≈ K_np K_pp⁻¹ K_pn`, and the matrix
//! inversion lemma turns `(K + αId)⁻¹` into
//!
//! ```text
//! (1/α) Id − (1/α²) K_np (K_pp + (1/α) K_pn K_np)⁻¹ K_pn
//! ```
//!
//! which only needs a `p × p` factorization. The result is exact when every
//! column is a landmark or when `K` has rank `p` and the landmarks span it.

use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelMatrix;
use crate::linalg;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NystroemParams {
    pub landmark_count: usize,
    pub seed: u64,
}

impl NystroemParams {
    pub fn new(landmark_count: usize, seed: u64) -> Self {
        Self {
            landmark_count,
            seed,
        }
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        if self.landmark_count == 0 || self.landmark_count > n {
            return Err(Error::InvalidInput(format!(
                "landmark count must lie in [1, {n}], got {}",
                self.landmark_count
            )));
        }
        Ok(())
    }
}

/// Draws `landmark_count` distinct indices from `0..n`, uniformly without
/// replacement. The draw is a pure function of `(n, params)`.
pub fn sample_landmarks(n: usize, params: &NystroemParams) -> Result<Vec<usize>> {
    params.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    Ok(rand::seq::index::sample(&mut rng, n, params.landmark_count).into_vec())
}

/// Factored form of the approximate inverse. Applying it to an `n × l` block
/// costs `O(n·p·l)`, so the `n × n` matrix never has to be formed.
#[derive(Clone, Debug)]
pub struct NystroemInverse {
    alpha: f64,
    landmarks: Vec<usize>,
    k_np: DMatrix<f64>,
    inner: Cholesky<f64, Dyn>,
}

impl NystroemInverse {
    pub fn new(k: &DMatrix<f64>, alpha: f64, params: &NystroemParams) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidInput(format!(
                "nystroem regularization must be positive, got {alpha}"
            )));
        }
        let n = k.nrows();
        let landmarks = sample_landmarks(n, params)?;
        let p = landmarks.len();
        let k_np = k.select_columns(&landmarks);
        let mut inner = k_np.select_rows(&landmarks);
        linalg::symmetrize(&mut inner);
        let jitter = 1e-10 * inner.trace() / p as f64;
        inner += (k_np.transpose() * &k_np) / alpha;
        for i in 0..p {
            inner[(i, i)] += jitter;
        }
        linalg::symmetrize(&mut inner);
        let inner = Cholesky::new(inner).ok_or(Error::LandmarkDegeneracy { landmarks: p })?;
        Ok(Self {
            alpha,
            landmarks,
            k_np,
            inner,
        })
    }

    pub fn landmarks(&self) -> &[usize] {
        &self.landmarks
    }

    /// Approximates `(K + αId)⁻¹ · rhs`.
    pub fn apply(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let projected = self.k_np.transpose() * rhs;
        let solved = self.inner.solve(&projected);
        rhs / self.alpha - (&self.k_np * solved) / (self.alpha * self.alpha)
    }

    /// The dense `n × n` approximation, symmetrized.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.k_np.nrows();
        let solved = self.inner.solve(&self.k_np.transpose());
        let mut b = &self.k_np * solved;
        b /= -(self.alpha * self.alpha);
        for i in 0..n {
            b[(i, i)] += 1.0 / self.alpha;
        }
        linalg::symmetrize(&mut b);
        b
    }
}

/// Dense approximation of `(K + αId)⁻¹` from sampled landmark columns.
pub fn nystroem_inverse(
    k: &KernelMatrix,
    alpha: f64,
    params: &NystroemParams,
) -> Result<DMatrix<f64>> {
    if !k.is_square() {
        return Err(Error::InvalidInput(
            "nystroem inverse requires a square kernel".into(),
        ));
    }
    Ok(NystroemInverse::new(k.matrix(), alpha, params)?.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{rbf_kernel, FeatureMatrix, RbfParams};
    use rand::Rng;

    fn exact_inverse(k: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
        let n = k.nrows();
        (k + DMatrix::identity(n, n) * alpha).try_inverse().unwrap()
    }

    fn rbf(n: usize, seed: u64) -> KernelMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x =
            FeatureMatrix::new(DMatrix::from_fn(n, 3, |_, _| rng.gen_range(-1.0..1.0))).unwrap();
        rbf_kernel(&x, RbfParams::new(0.5).unwrap())
    }

    #[test]
    fn all_landmarks_is_exact() {
        let k = rbf(25, 1);
        let b = nystroem_inverse(&k, 0.1, &NystroemParams::new(25, 3)).unwrap();
        let exact = exact_inverse(k.matrix(), 0.1);
        assert!(linalg::relative_frobenius(&b, &exact) < 1e-6);
    }

    #[test]
    fn low_rank_kernel_with_rank_landmarks_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = DMatrix::from_fn(30, 4, |_, _| rng.gen_range(-1.0..1.0));
        let k = KernelMatrix::square(&f * f.transpose()).unwrap();
        let b = nystroem_inverse(&k, 0.5, &NystroemParams::new(4, 2)).unwrap();
        let exact = exact_inverse(k.matrix(), 0.5);
        assert!(linalg::relative_frobenius(&b, &exact) < 1e-6);
    }

    #[test]
    fn identity_kernel_unit_alpha() {
        let k = KernelMatrix::square(DMatrix::identity(6, 6)).unwrap();
        for seed in 0..4 {
            let b = nystroem_inverse(&k, 1.0, &NystroemParams::new(6, seed)).unwrap();
            assert!((b - DMatrix::identity(6, 6) * 0.5).amax() < 1e-10);
        }
        // With fewer landmarks, Id is approximated by the landmark indicator,
        // so (indicator + Id)⁻¹ is 0.5 on landmarks and 1 elsewhere.
        for count in 1..6 {
            let params = NystroemParams::new(count, 9);
            let landmarks = sample_landmarks(6, &params).unwrap();
            let b = nystroem_inverse(&k, 1.0, &params).unwrap();
            let expected = DMatrix::from_fn(6, 6, |i, j| match (i == j, landmarks.contains(&i)) {
                (false, _) => 0.0,
                (true, true) => 0.5,
                (true, false) => 1.0,
            });
            assert!((b - expected).amax() < 1e-9);
        }
    }

    #[test]
    fn output_is_exactly_symmetric() {
        let k = rbf(40, 2);
        let b = nystroem_inverse(&k, 0.05, &NystroemParams::new(10, 4)).unwrap();
        assert_eq!(b, b.transpose());
    }

    #[test]
    fn factored_apply_matches_dense() {
        let k = rbf(30, 5);
        let inv = NystroemInverse::new(k.matrix(), 0.1, &NystroemParams::new(12, 1)).unwrap();
        let rhs = DMatrix::from_fn(30, 2, |i, j| (i as f64 - 3.0 * j as f64).sin());
        let dense = inv.to_dense() * &rhs;
        assert!((inv.apply(&rhs) - dense).amax() < 1e-9);
    }

    #[test]
    fn landmark_sampling() {
        let mut all = sample_landmarks(8, &NystroemParams::new(8, 1)).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..8).collect::<Vec<_>>());

        let a = sample_landmarks(50, &NystroemParams::new(7, 42)).unwrap();
        let b = sample_landmarks(50, &NystroemParams::new(7, 42)).unwrap();
        assert_eq!(a, b);

        assert!(sample_landmarks(3, &NystroemParams::new(4, 0)).is_err());
        assert!(sample_landmarks(3, &NystroemParams::new(0, 0)).is_err());
    }

    #[test]
    fn landmark_inclusion_is_uniform() {
        // Monte Carlo over seeds: each index is included with probability 3/10.
        let mut counts = [0usize; 10];
        for seed in 0..1000 {
            for i in sample_landmarks(10, &NystroemParams::new(3, seed)).unwrap() {
                counts[i] += 1;
            }
        }
        for c in counts {
            let rate = c as f64 / 1000.0;
            assert!((rate - 0.3).abs() <= 0.05, "inclusion rate {rate}");
        }
    }

    #[test]
    fn rejects_bad_alpha() {
        let k = rbf(5, 3);
        assert!(nystroem_inverse(&k, 0.0, &NystroemParams::new(2, 0)).is_err());
    }
}
