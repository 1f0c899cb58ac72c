//! Fair kernel decomposition.
//!
//! Each iteration fits a ridge direction predicting the protected attributes
//! in the kernel's empirical feature space and projects it out, working only
//! with kernel matrices:
//!
//! ```text
//! B      = (K + α̃ Id)⁻¹
//! 𝒯      = (Pᵀ B K B P)⁻¹            (scalar τ_norm when l = 1)
//! M      = B P 𝒯 Pᵀ B
//! T^K    = Id − M K
//! K_next = K T^K
//! ```
//!
//! The composed transformation `T_m = Π T^K` maps rows of the original
//! kernel, including test-vs-train cross-kernel rows, to rows of the
//! decorrelated kernel: `K_(m) = K_(0) T_m`.
//!
//! Every factor has the form `Id − L Rᵀ` with `L = B P` and `R = K B P 𝒯`
//! (both `n × l`), so updates cost `O(n² l)` beyond the factorization and
//! the factored storage mode keeps `T_m` in `O(m n l)` memory.

use std::io::{BufRead, Write};

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::container;
use crate::error::{ensure_dims, Error, Result};
use crate::kernels::{KernelKind, KernelMatrix};
use crate::linalg::{self, Fingerprint};
use crate::nystroem::{NystroemInverse, NystroemParams};

/// Ridge penalty for the fairness direction in KRR pipelines.
pub const DEFAULT_RIDGE_ALPHA_KRR: f64 = 0.1;
/// Ridge penalty for the fairness direction in SVR pipelines.
pub const DEFAULT_RIDGE_ALPHA_SVR: f64 = 0.05;

const DEGENERATE_DIRECTION_RATIO: f64 = 1e-12;
const MAX_NORMALIZATION: f64 = 1e12;

/// `n × l` matrix of continuous protected attribute values.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtectedAttributes(DMatrix<f64>);

impl ProtectedAttributes {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidInput(
                "protected attributes need at least one row and one column".into(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "protected attributes contain non-finite values".into(),
            ));
        }
        Ok(Self(data))
    }

    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(values.len(), 1, values))
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

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.0.column(j).iter().copied().collect()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        Self::new(self.0.select_rows(indices))
    }

    /// Column-wise `(mean, population std)`.
    pub fn column_stats(&self) -> Vec<(f64, f64)> {
        self.0
            .column_iter()
            .map(|c| {
                let values: Vec<f64> = c.iter().copied().collect();
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                (mean, linalg::population_std(&values))
            })
            .collect()
    }

    /// Zero-mean, unit-variance copy. A constant column is rejected because
    /// it carries no information that could be removed.
    pub fn standardized(&self) -> Result<Self> {
        let stats = self.column_stats();
        if let Some(j) = stats
            .iter()
            .position(|&(mean, std)| std <= 1e-12 * mean.abs().max(1.0))
        {
            return Err(Error::DegenerateAttribute {
                iteration: 1,
                reason: format!("protected column {j} is constant"),
            });
        }
        let mut out = self.0.clone();
        for (j, (mean, std)) in stats.into_iter().enumerate() {
            out.column_mut(j).apply(|v| *v = (*v - mean) / std);
        }
        Ok(Self(out))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InverseMode {
    /// Cholesky factorization of `K + α̃ Id`.
    #[default]
    Exact,
    /// Landmark approximation of `(K + α̃ Id)⁻¹`; landmarks are redrawn each
    /// iteration from a stream derived from `seed`.
    Nystroem { landmark_count: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TransformStorage {
    /// Keep the composed `n × n` matrix `T_m`.
    #[default]
    Dense,
    /// Keep the per-iteration `n × l` factors and apply them lazily.
    Factored,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionParams {
    pub iterations: usize,
    pub ridge_alpha: f64,
    #[serde(default)]
    pub inverse_mode: InverseMode,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default)]
    pub storage: TransformStorage,
}

fn default_true() -> bool {
    true
}

impl DecompositionParams {
    pub fn new(iterations: usize, ridge_alpha: f64) -> Self {
        Self {
            iterations,
            ridge_alpha,
            inverse_mode: InverseMode::Exact,
            standardize: true,
            storage: TransformStorage::Dense,
        }
    }

    pub fn with_inverse_mode(mut self, mode: InverseMode) -> Self {
        self.inverse_mode = mode;
        self
    }

    pub fn with_storage(mut self, storage: TransformStorage) -> Self {
        self.storage = storage;
        self
    }

    pub fn with_standardize(mut self, standardize: bool) -> Self {
        self.standardize = standardize;
        self
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        if !(self.ridge_alpha.is_finite() && self.ridge_alpha > 0.0) {
            return Err(Error::InvalidInput(format!(
                "ridge alpha must be positive, got {}",
                self.ridge_alpha
            )));
        }
        if let InverseMode::Nystroem {
            landmark_count,
            seed,
        } = self.inverse_mode
        {
            NystroemParams::new(landmark_count, seed).validate(n)?;
        }
        Ok(())
    }
}

impl Default for DecompositionParams {
    fn default() -> Self {
        Self::new(0, DEFAULT_RIDGE_ALPHA_KRR)
    }
}

/// How the `l × l` normalization is inverted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Scalar division for a single attribute, matrix inverse otherwise.
    #[default]
    Auto,
    /// Always go through the `l × l` matrix inverse.
    Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    /// `(Pᵀ B K B P)⁻¹` for a single attribute.
    pub tau_norm: Option<f64>,
    /// Condition number of `Pᵀ B K B P`.
    pub normalization_condition: f64,
    /// `‖K_(i) B_(i−1) p_j‖` per protected column, ideally zero.
    pub residual_norm: Vec<f64>,
}

#[derive(Clone, Debug)]
enum TransformRepr {
    Dense(DMatrix<f64>),
    Factored(Vec<(DMatrix<f64>, DMatrix<f64>)>),
}

impl TransformRepr {
    fn right_multiply(&self, rows: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            TransformRepr::Dense(t) => rows * t,
            TransformRepr::Factored(factors) => {
                let mut out = rows.clone();
                for (l, r) in factors {
                    let proj = &out * l;
                    out -= proj * r.transpose();
                }
                out
            }
        }
    }
}

/// The composed transformation `T_m` for one training kernel.
#[derive(Clone, Debug)]
pub struct FairTransform {
    n: usize,
    iterations: usize,
    ridge_alpha: f64,
    source_fingerprint: Fingerprint,
    output_fingerprint: Fingerprint,
    repr: TransformRepr,
    diagnostics: Vec<IterationDiagnostics>,
}

impl FairTransform {
    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn ridge_alpha(&self) -> f64 {
        self.ridge_alpha
    }

    pub fn source_fingerprint(&self) -> &Fingerprint {
        &self.source_fingerprint
    }

    /// Fingerprint carried by kernels this transform produces.
    pub fn output_fingerprint(&self) -> &Fingerprint {
        &self.output_fingerprint
    }

    pub fn diagnostics(&self) -> &[IterationDiagnostics] {
        &self.diagnostics
    }

    pub fn is_factored(&self) -> bool {
        matches!(self.repr, TransformRepr::Factored(_))
    }

    /// The dense `n × n` matrix `T_m`.
    pub fn matrix(&self) -> DMatrix<f64> {
        match &self.repr {
            TransformRepr::Dense(t) => t.clone(),
            TransformRepr::Factored(_) => self.right_multiply(&DMatrix::identity(self.n, self.n)),
        }
    }

    /// `rows · T_m` for any `k × n` block.
    pub fn right_multiply(&self, rows: &DMatrix<f64>) -> DMatrix<f64> {
        self.repr.right_multiply(rows)
    }

    /// Writes the transform as a matrix container with header
    /// `{n, m, alpha_tilde, fingerprint, output_fingerprint, diagnostics}`.
    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut header = Map::new();
        header.insert("n".into(), Value::from(self.n));
        header.insert("m".into(), Value::from(self.iterations));
        header.insert("alpha_tilde".into(), Value::from(self.ridge_alpha));
        header.insert(
            "fingerprint".into(),
            Value::from(self.source_fingerprint.as_str()),
        );
        header.insert(
            "output_fingerprint".into(),
            Value::from(self.output_fingerprint.as_str()),
        );
        header.insert(
            "diagnostics".into(),
            serde_json::to_value(&self.diagnostics)?,
        );
        container::write_container(out, TRANSFORM_FORMAT, header, &self.matrix())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let (header, matrix) = container::read_container(input, TRANSFORM_FORMAT)?;
        let n = container::header_f64(&header, "n")? as usize;
        ensure_dims(n, matrix.nrows(), "transform rows")?;
        ensure_dims(n, matrix.ncols(), "transform columns")?;
        let diagnostics = match header.get("diagnostics") {
            Some(v) => serde_json::from_value(v.clone())?,
            None => Vec::new(),
        };
        Ok(Self {
            n,
            iterations: container::header_f64(&header, "m")? as usize,
            ridge_alpha: container::header_f64(&header, "alpha_tilde")?,
            source_fingerprint: container::header_str(&header, "fingerprint")?
                .to_string()
                .into(),
            output_fingerprint: container::header_str(&header, "output_fingerprint")?
                .to_string()
                .into(),
            repr: TransformRepr::Dense(matrix),
            diagnostics,
        })
    }
}

pub const TRANSFORM_FORMAT: &str = "fair-transform";

/// Stateful driver of the iteration. Larger `m` continues from smaller `m`,
/// so a sweep over iteration counts only pays for the largest one.
#[derive(Clone, Debug)]
pub struct Decomposer {
    kernel: DMatrix<f64>,
    initial: DMatrix<f64>,
    protected: DMatrix<f64>,
    params: DecompositionParams,
    normalization: Normalization,
    iteration: usize,
    repr: TransformRepr,
    diagnostics: Vec<IterationDiagnostics>,
    source: Fingerprint,
    lineage: Fingerprint,
}

impl Decomposer {
    pub fn new(
        k: &KernelMatrix,
        protected: &ProtectedAttributes,
        params: DecompositionParams,
    ) -> Result<Self> {
        if !k.is_square() {
            return Err(Error::InvalidInput(
                "decomposition requires a square training kernel".into(),
            ));
        }
        let n = k.nrows();
        ensure_dims(n, protected.nrows(), "protected attribute rows")?;
        params.validate(n)?;
        k.validate_psd()?;
        let protected = if params.standardize {
            protected.standardized()?
        } else {
            protected.clone()
        };
        let mut lineage_params = vec![params.ridge_alpha, f64::from(u8::from(params.standardize))];
        if let InverseMode::Nystroem {
            landmark_count,
            seed,
        } = params.inverse_mode
        {
            lineage_params.extend([landmark_count as f64, seed as f64]);
        }
        let lineage = k.column_source().derive("protected", &[]).derive(
            Fingerprint::of_matrix("p", protected.as_matrix()).as_str(),
            &lineage_params,
        );
        let repr = match params.storage {
            TransformStorage::Dense => TransformRepr::Dense(DMatrix::identity(n, n)),
            TransformStorage::Factored => TransformRepr::Factored(Vec::new()),
        };
        Ok(Self {
            kernel: k.matrix().clone(),
            initial: k.matrix().clone(),
            protected: protected.0,
            params,
            normalization: Normalization::Auto,
            iteration: 0,
            repr,
            diagnostics: Vec::new(),
            source: k.column_source().clone(),
            lineage,
        })
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// The protected attributes as used internally (standardized if enabled).
    pub fn protected(&self) -> ProtectedAttributes {
        ProtectedAttributes(self.protected.clone())
    }

    /// The current kernel `K_(i)`.
    pub fn kernel(&self) -> KernelMatrix {
        KernelMatrix::from_parts(
            self.kernel.clone(),
            KernelKind::Square,
            self.output_fingerprint(),
        )
    }

    pub fn kernel_matrix(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    fn output_fingerprint(&self) -> Fingerprint {
        if self.iteration == 0 {
            self.source.clone()
        } else {
            self.lineage.derive("iterations", &[self.iteration as f64])
        }
    }

    /// The composed transformation `T_(i)` up to the current iteration.
    pub fn transform(&self) -> FairTransform {
        FairTransform {
            n: self.kernel.nrows(),
            iterations: self.iteration,
            ridge_alpha: self.params.ridge_alpha,
            source_fingerprint: self.source.clone(),
            output_fingerprint: self.output_fingerprint(),
            repr: self.repr.clone(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// Runs iterations until `m` have been applied. Fails if `m` is behind the
    /// current iteration.
    pub fn advance_to(&mut self, m: usize) -> Result<()> {
        if m < self.iteration {
            return Err(Error::InvalidInput(format!(
                "cannot rewind decomposition from iteration {} to {m}",
                self.iteration
            )));
        }
        while self.iteration < m {
            self.step()?;
        }
        Ok(())
    }

    /// Applies one iteration, `K_(i) = K_(i−1) T^{K_(i)}`.
    pub fn step(&mut self) -> Result<&IterationDiagnostics> {
        let iteration = self.iteration + 1;
        let n = self.kernel.nrows();
        let l = self.protected.ncols();
        let alpha = self.params.ridge_alpha;

        // L = B P, with B = (K + α̃ Id)⁻¹ never formed explicitly.
        let bp = match self.params.inverse_mode {
            InverseMode::Exact => {
                let chol = linalg::cholesky_shifted(&self.kernel, alpha, "K + alpha_tilde Id")?;
                chol.solve(&self.protected)
            }
            InverseMode::Nystroem {
                landmark_count,
                seed,
            } => {
                let params = NystroemParams::new(landmark_count, iteration_seed(seed, iteration));
                NystroemInverse::new(&self.kernel, alpha, &params)?.apply(&self.protected)
            }
        };
        if bp.norm() <= DEGENERATE_DIRECTION_RATIO * self.protected.norm() {
            return Err(Error::DegenerateAttribute {
                iteration,
                reason: "fitted direction is numerically zero".into(),
            });
        }

        let kbp = &self.kernel * &bp;
        let mut gram = bp.transpose() * &kbp;
        linalg::symmetrize(&mut gram);
        let (tau, tau_scalar, condition) =
            invert_normalization(&gram, iteration, self.normalization)?;
        let r = &kbp * &tau;

        // K ← Tᵀ K T with T = Id − B P 𝒯 Pᵀ B K. Equal to K − K B P 𝒯 Pᵀ B K,
        // but the second correction cancels the first-order rounding error
        // left in A B P, which otherwise compounds across iterations.
        match &mut self.repr {
            TransformRepr::Dense(t) => {
                let tl = &*t * &bp;
                *t -= tl * r.transpose();
            }
            TransformRepr::Factored(factors) => factors.push((bp.clone(), r)),
        }

        // Congruence form K_(i) = T_iᵀ K_(0) T_i: rounding in removed directions stays O(ε²).
        let k0t = self.repr.right_multiply(&self.initial);
        self.kernel = self.repr.right_multiply(&k0t.transpose());
        linalg::symmetrize(&mut self.kernel);

        let residual = &self.kernel * &bp;
        let residual_norm = (0..l).map(|j| residual.column(j).norm()).collect();
        debug_assert_eq!(self.kernel.nrows(), n);

        self.iteration = iteration;
        self.diagnostics.push(IterationDiagnostics {
            iteration,
            tau_norm: tau_scalar,
            normalization_condition: condition,
            residual_norm,
        });
        Ok(self.diagnostics.last().expect("just pushed"))
    }
}

/// Independent per-iteration landmark seed from a counter-based stream.
fn iteration_seed(seed: u64, iteration: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    rng.next_u64()
}

/// Returns `(𝒯, scalar τ_norm if l = 1, condition number)`.
fn invert_normalization(
    gram: &DMatrix<f64>,
    iteration: usize,
    normalization: Normalization,
) -> Result<(DMatrix<f64>, Option<f64>, f64)> {
    let l = gram.nrows();
    let degenerate = |reason: String| Error::DegenerateAttribute { iteration, reason };

    if l == 1 && normalization == Normalization::Auto {
        let s = gram[(0, 0)];
        if !(s > 0.0) || 1.0 / s > MAX_NORMALIZATION {
            return Err(degenerate(format!(
                "normalization τ_norm = 1/{s:.3e} is too large"
            )));
        }
        let tau = 1.0 / s;
        return Ok((DMatrix::from_element(1, 1, tau), Some(tau), 1.0));
    }

    let eig = SymmetricEigen::new(gram.clone());
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
    if !(max > 0.0) || 1.0 / max > MAX_NORMALIZATION {
        return Err(degenerate("no protected information remains".into()));
    }
    if l > 1 && min <= DEGENERATE_DIRECTION_RATIO * max {
        return Err(Error::CollinearAttributes { iteration });
    }
    if !(min > 0.0) || 1.0 / min > MAX_NORMALIZATION {
        return Err(degenerate(format!(
            "normalization matrix has eigenvalue {min:.3e}"
        )));
    }
    let chol: Cholesky<f64, Dyn> =
        Cholesky::new(gram.clone()).ok_or(Error::CollinearAttributes { iteration })?;
    let mut tau = chol.inverse();
    linalg::symmetrize(&mut tau);
    let scalar = (l == 1).then(|| tau[(0, 0)]);
    Ok((tau, scalar, max / min))
}

/// Transforms a training kernel `params.iterations` times.
///
/// Returns `K_(m)` together with `T_m`, satisfying `K_(m) = K_(0) T_m` up to
/// the per-iteration symmetrization.
pub fn decompose(
    k: &KernelMatrix,
    protected: &ProtectedAttributes,
    params: DecompositionParams,
) -> Result<(KernelMatrix, FairTransform)> {
    let mut decomposer = Decomposer::new(k, protected, params)?;
    decomposer.advance_to(params.iterations)?;
    Ok((decomposer.kernel(), decomposer.transform()))
}

/// Maps a test × train cross kernel through `T_m`.
pub fn apply_transform(k_cross: &KernelMatrix, transform: &FairTransform) -> Result<KernelMatrix> {
    ensure_dims(transform.n, k_cross.ncols(), "cross kernel columns")?;
    if k_cross.column_source() != &transform.source_fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: transform.source_fingerprint.to_string(),
            found: k_cross.column_source().to_string(),
        });
    }
    let out = if transform.iterations == 0 {
        k_cross.matrix().clone()
    } else {
        transform.right_multiply(k_cross.matrix())
    };
    Ok(KernelMatrix::from_parts(
        out,
        KernelKind::Cross,
        transform.output_fingerprint.clone(),
    ))
}

/// `‖K_next (K_prev + α̃ Id)⁻¹ p_j‖` for each protected column `j`: the
/// kernel-space image of the direction removed between the two kernels.
pub fn residual_protected_norm(
    k_prev: &KernelMatrix,
    k_next: &KernelMatrix,
    protected: &ProtectedAttributes,
    ridge_alpha: f64,
) -> Result<Vec<f64>> {
    let n = k_prev.nrows();
    ensure_dims(n, k_prev.ncols(), "previous kernel columns")?;
    ensure_dims(n, k_next.nrows(), "next kernel rows")?;
    ensure_dims(n, k_next.ncols(), "next kernel columns")?;
    ensure_dims(n, protected.nrows(), "protected attribute rows")?;
    if !(ridge_alpha.is_finite() && ridge_alpha > 0.0) {
        return Err(Error::InvalidInput("ridge alpha must be positive".into()));
    }
    let chol = linalg::cholesky_shifted(k_prev.matrix(), ridge_alpha, "K_prev + alpha_tilde Id")?;
    let image = k_next.matrix() * chol.solve(protected.as_matrix());
    Ok(image.column_iter().map(|c| c.norm()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{rbf_cross_kernel, rbf_kernel, FeatureMatrix, RbfParams};
    use rand::Rng;

    fn instance(
        n: usize,
        l: usize,
        seed: u64,
    ) -> (FeatureMatrix, KernelMatrix, ProtectedAttributes) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x =
            FeatureMatrix::new(DMatrix::from_fn(n, 3, |_, _| rng.gen_range(-2.0..2.0))).unwrap();
        let k = rbf_kernel(&x, RbfParams::new(0.5).unwrap());
        let p = DMatrix::from_fn(n, l, |i, j| {
            x.as_matrix()[(i, j)].sin() + 0.3 * rng.gen_range(-1.0..1.0)
        });
        (x, k, ProtectedAttributes::new(p).unwrap())
    }

    #[test]
    fn zero_iterations_is_identity() {
        let (_, k, p) = instance(6, 1, 1);
        let (k0, t) = decompose(&k, &p, DecompositionParams::new(0, 0.1)).unwrap();
        assert_eq!(k0.matrix(), k.matrix());
        assert_eq!(t.matrix(), DMatrix::identity(6, 6));
        assert_eq!(k0.column_source(), k.column_source());
    }

    #[test]
    fn constant_protected_attribute_is_degenerate() {
        let (_, k, _) = instance(6, 1, 2);
        let zero = ProtectedAttributes::from_column(&[0.0; 6]).unwrap();
        let err = decompose(&k, &zero, DecompositionParams::new(1, 0.1)).unwrap_err();
        assert!(matches!(
            err,
            Error::DegenerateAttribute { iteration: 1, .. }
        ));
        let err = decompose(
            &k,
            &zero,
            DecompositionParams::new(1, 0.1).with_standardize(false),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::DegenerateAttribute { iteration: 1, .. }
        ));
    }

    #[test]
    fn kernel_equals_original_times_transform() {
        let (_, k, p) = instance(15, 2, 3);
        let (km, t) = decompose(&k, &p, DecompositionParams::new(4, 0.1)).unwrap();
        assert!(linalg::relative_frobenius(&(k.matrix() * t.matrix()), km.matrix()) < 1e-10);
    }

    #[test]
    fn factored_storage_matches_dense() {
        let (_, k, p) = instance(20, 1, 4);
        let (_, dense) = decompose(&k, &p, DecompositionParams::new(6, 0.05)).unwrap();
        let (_, lazy) = decompose(
            &k,
            &p,
            DecompositionParams::new(6, 0.05).with_storage(TransformStorage::Factored),
        )
        .unwrap();
        assert!(lazy.is_factored());
        assert!((dense.matrix() - lazy.matrix()).amax() < 1e-10);
    }

    #[test]
    fn composition_accumulates_one_factor_per_step() {
        let (_, k, p) = instance(12, 1, 5);
        let mut d = Decomposer::new(&k, &p, DecompositionParams::new(0, 0.1)).unwrap();
        d.advance_to(2).unwrap();
        let t_prev = d.transform().matrix();
        let k_prev = d.kernel_matrix().clone();
        d.step().unwrap();
        // Single-step transform built from k_prev directly.
        let kp = KernelMatrix::square(k_prev).unwrap();
        let mut single = Decomposer::new(
            &kp,
            &d.protected(),
            DecompositionParams::new(0, 0.1).with_standardize(false),
        )
        .unwrap();
        single.step().unwrap();
        let expected = t_prev * single.transform().matrix();
        assert!((d.transform().matrix() - expected).amax() < 1e-10);
    }

    #[test]
    fn residual_vanishes_after_each_iteration() {
        let (_, k, p) = instance(25, 2, 6);
        let mut d = Decomposer::new(&k, &p, DecompositionParams::new(0, 0.1)).unwrap();
        let ps = d.protected();
        let pnorm = ps.as_matrix().norm();
        for _ in 0..5 {
            let before = d.kernel();
            d.step().unwrap();
            let after = d.kernel();
            let res = residual_protected_norm(&before, &after, &ps, 0.1).unwrap();
            assert!(res.iter().all(|&r| r <= 1e-6 * pnorm), "{res:?}");
        }
        let fresh = residual_protected_norm(&k, &k, &ps, 0.1).unwrap();
        assert!(fresh.iter().all(|&r| r > 0.0));
    }

    #[test]
    fn residual_is_finite_for_unrelated_matrices() {
        let (_, a, p) = instance(8, 1, 7);
        let (_, b, _) = instance(8, 1, 8);
        let res = residual_protected_norm(&a, &b, &p, 0.3).unwrap();
        assert!(res.iter().all(|r| r.is_finite() && *r >= 0.0));
    }

    #[test]
    fn apply_transform_reproduces_training_kernel() {
        let (x, k, p) = instance(18, 1, 9);
        let (km, t) = decompose(&k, &p, DecompositionParams::new(3, 0.1)).unwrap();
        let cross = rbf_cross_kernel(&x, &x, RbfParams::new(0.5).unwrap()).unwrap();
        let out = apply_transform(&cross, &t).unwrap();
        assert!((out.matrix() - km.matrix()).amax() < 1e-10);
        assert_eq!(out.column_source(), km.column_source());

        let dup = x.select_rows(&[3, 3]).unwrap();
        let cross = rbf_cross_kernel(&dup, &x, RbfParams::new(0.5).unwrap()).unwrap();
        let out = apply_transform(&cross, &t).unwrap();
        assert_eq!(out.matrix().row(0), out.matrix().row(1));
    }

    #[test]
    fn apply_transform_identity_and_mismatch() {
        let (x, k, p) = instance(10, 1, 10);
        let (_, t0) = decompose(&k, &p, DecompositionParams::new(0, 0.1)).unwrap();
        let cross = rbf_cross_kernel(
            &x.select_rows(&[1, 2]).unwrap(),
            &x,
            RbfParams::new(0.5).unwrap(),
        )
        .unwrap();
        assert_eq!(
            apply_transform(&cross, &t0).unwrap().matrix(),
            cross.matrix()
        );

        let other = rbf_cross_kernel(&x, &x, RbfParams::new(0.6).unwrap()).unwrap();
        assert!(matches!(
            apply_transform(&other, &t0),
            Err(Error::FingerprintMismatch { .. })
        ));
        let (y, _, _) = instance(9, 1, 11);
        let wrong = rbf_cross_kernel(&y, &y, RbfParams::new(0.5).unwrap()).unwrap();
        assert!(matches!(
            apply_transform(&wrong, &t0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn scalar_and_matrix_normalization_agree() {
        let (_, k, p) = instance(20, 1, 12);
        let params = DecompositionParams::new(0, 0.1);
        let mut scalar = Decomposer::new(&k, &p, params).unwrap();
        let mut matrix = Decomposer::new(&k, &p, params)
            .unwrap()
            .with_normalization(Normalization::Matrix);
        scalar.advance_to(5).unwrap();
        matrix.advance_to(5).unwrap();
        assert!((scalar.kernel_matrix() - matrix.kernel_matrix()).amax() < 1e-10);
    }

    #[test]
    fn collinear_attributes_are_rejected() {
        let (_, k, p) = instance(15, 1, 13);
        let col = p.column(0);
        let twice = DMatrix::from_fn(15, 2, |i, j| col[i] * (1.0 + j as f64));
        let err = decompose(
            &k,
            &ProtectedAttributes::new(twice).unwrap(),
            DecompositionParams::new(1, 0.1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::CollinearAttributes { iteration: 1 }));
    }

    #[test]
    fn rejects_non_psd_and_bad_params() {
        let bad =
            KernelMatrix::square(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        let p = ProtectedAttributes::from_column(&[0.0, 1.0]).unwrap();
        assert!(matches!(
            decompose(&bad, &p, DecompositionParams::new(1, 0.1)),
            Err(Error::NotPositiveSemiDefinite { .. })
        ));
        let (_, k, p) = instance(5, 1, 14);
        assert!(decompose(&k, &p, DecompositionParams::new(1, 0.0)).is_err());
        let nys = DecompositionParams::new(1, 0.1).with_inverse_mode(InverseMode::Nystroem {
            landmark_count: 6,
            seed: 0,
        });
        assert!(decompose(&k, &p, nys).is_err());
    }

    #[test]
    fn nystroem_with_all_landmarks_matches_exact() {
        let (_, k, p) = instance(30, 1, 15);
        let (exact, _) = decompose(&k, &p, DecompositionParams::new(4, 0.1)).unwrap();
        let nys = DecompositionParams::new(4, 0.1).with_inverse_mode(InverseMode::Nystroem {
            landmark_count: 30,
            seed: 7,
        });
        let (approx, _) = decompose(&k, &p, nys).unwrap();
        assert!(linalg::relative_frobenius(approx.matrix(), exact.matrix()) < 1e-6);
    }

    #[test]
    fn serialization_round_trip() {
        let (_, k, p) = instance(9, 1, 16);
        let (_, t) = decompose(&k, &p, DecompositionParams::new(2, 0.1)).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let back = FairTransform::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.matrix(), t.matrix());
        assert_eq!(back.source_fingerprint(), t.source_fingerprint());
        assert_eq!(back.output_fingerprint(), t.output_fingerprint());
        assert_eq!(back.diagnostics(), t.diagnostics());
        assert_eq!((back.iterations(), back.ridge_alpha()), (2, 0.1));
    }
}
