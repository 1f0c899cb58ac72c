//! Epsilon-support vector regression over a precomputed kernel.
//!
//! The dual is solved in the usual `2n`-variable form
//!
//! ```text
//! min ½ aᵀ Q a + qᵀ a   s.t.  Σ s_t a_t = 0,  0 ≤ a_t ≤ C
//! ```
//!
//! with `a = (α, α*)`, signs `s = (+1, −1)`, `Q_ts = s_t s_s K(t mod n, s mod n)`
//! and `q = (ε − y, ε + y)`, by sequential minimal optimization using
//! second-order working-set selection. The regression coefficients are
//! `β = α − α*`.

use std::io::{BufRead, Write};

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde_json::{Map, Value};

use crate::container;
use crate::error::{ensure_dims, Error, Result};
use crate::kernels::KernelMatrix;
use crate::linalg::{self, Fingerprint};

use super::check_prediction_kernel;

pub const DEFAULT_SVR_TOL: f64 = 1e-6;
const TAU: f64 = 1e-12;
const MAX_ITER_PER_SAMPLE: usize = 100_000;
const PSD_REPAIR_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvrParams {
    pub epsilon: f64,
    pub c: f64,
    pub tol: f64,
}

impl SvrParams {
    pub fn new(epsilon: f64, c: f64) -> Self {
        Self {
            epsilon,
            c,
            tol: DEFAULT_SVR_TOL,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "svr epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidInput(format!(
                "svr C must be positive, got {}",
                self.c
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "svr tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvrModel {
    dual_coefficients: DVector<f64>,
    bias: f64,
    epsilon: f64,
    c: f64,
    support_indices: Vec<usize>,
    train_fingerprint: Fingerprint,
    iterations: usize,
}

impl SvrModel {
    /// `β_i = α_i − α_i*`.
    pub fn dual_coefficients(&self) -> &DVector<f64> {
        &self.dual_coefficients
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn support_indices(&self) -> &[usize] {
        &self.support_indices
    }

    pub fn train_fingerprint(&self) -> &Fingerprint {
        &self.train_fingerprint
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `−½ βᵀKβ + βᵀy − ε‖β‖₁`.
    pub fn dual_objective(&self, k_train: &DMatrix<f64>, y: &[f64]) -> f64 {
        let beta = &self.dual_coefficients;
        let kb = k_train * beta;
        let y = DVector::from_column_slice(y);
        -0.5 * beta.dot(&kb) + beta.dot(&y) - self.epsilon * beta.lp_norm(1)
    }

    /// `½ βᵀKβ + C Σ max(0, |y_i − f(x_i)| − ε)`.
    pub fn primal_objective(&self, k_train: &DMatrix<f64>, y: &[f64]) -> f64 {
        let beta = &self.dual_coefficients;
        let kb = k_train * beta;
        let slack: f64 = kb
            .iter()
            .zip(y)
            .map(|(f, t)| ((t - f - self.bias).abs() - self.epsilon).max(0.0))
            .sum();
        0.5 * beta.dot(&kb) + self.c * slack
    }

    /// Primal minus dual objective; non-negative and zero at the optimum.
    pub fn duality_gap(&self, k_train: &DMatrix<f64>, y: &[f64]) -> f64 {
        self.primal_objective(k_train, y) - self.dual_objective(k_train, y)
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut header = Map::new();
        header.insert("bias".into(), Value::from(self.bias));
        header.insert("epsilon".into(), Value::from(self.epsilon));
        header.insert("c".into(), Value::from(self.c));
        header.insert("iterations".into(), Value::from(self.iterations));
        header.insert(
            "train_fingerprint".into(),
            Value::from(self.train_fingerprint.as_str()),
        );
        let coefs = DMatrix::from_column_slice(
            self.dual_coefficients.len(),
            1,
            self.dual_coefficients.as_slice(),
        );
        container::write_container(out, SVR_FORMAT, header, &coefs)
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let (header, coefs) = container::read_container(input, SVR_FORMAT)?;
        ensure_dims(1, coefs.ncols(), "svr coefficient columns")?;
        let dual_coefficients: DVector<f64> = coefs.column(0).into_owned();
        let support_indices = support_of(&dual_coefficients);
        Ok(Self {
            dual_coefficients,
            bias: container::header_f64(&header, "bias")?,
            epsilon: container::header_f64(&header, "epsilon")?,
            c: container::header_f64(&header, "c")?,
            support_indices,
            train_fingerprint: container::header_str(&header, "train_fingerprint")?
                .to_string()
                .into(),
            iterations: container::header_f64(&header, "iterations")? as usize,
        })
    }
}

pub const SVR_FORMAT: &str = "svr-model";

fn support_of(beta: &DVector<f64>) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Returns a kernel safe for the convex solver: unchanged if it factors,
/// eigenvalue-clamped if it is indefinite only by rounding, and an error if
/// the violation exceeds `1e-8 · λ_max`.
fn convex_kernel(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if Cholesky::new(k.clone()).is_some() {
        return Ok(k.clone());
    }
    let eig = SymmetricEigen::new(k.clone());
    let max = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let min = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        return Ok(k.clone());
    }
    let tolerance = PSD_REPAIR_TOL * max;
    if min < -tolerance {
        return Err(Error::NotPositiveSemiDefinite {
            min_eigenvalue: min,
            tolerance,
        });
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    let mut repaired =
        &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    linalg::symmetrize(&mut repaired);
    Ok(repaired)
}

struct Solver<'a> {
    k: &'a DMatrix<f64>,
    n: usize,
    c: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
}

impl Solver<'_> {
    fn sign(&self, t: usize) -> f64 {
        if t < self.n {
            1.0
        } else {
            -1.0
        }
    }

    /// `Q_ts`.
    fn q(&self, t: usize, s: usize) -> f64 {
        self.sign(t) * self.sign(s) * self.k[(t % self.n, s % self.n)]
    }

    fn at_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.c
    }

    fn at_lower(&self, t: usize) -> bool {
        self.alpha[t] <= 0.0
    }

    /// Second-order working-set selection. `None` once the maximal KKT
    /// violation is below `tol`; otherwise the pair and the violation.
    fn select_pair(&self, tol: f64) -> Option<(usize, usize)> {
        let total = 2 * self.n;
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..total {
            if self.sign(t) > 0.0 {
                if !self.at_upper(t) && -self.grad[t] >= gmax {
                    gmax = -self.grad[t];
                    i = t;
                }
            } else if !self.at_lower(t) && self.grad[t] >= gmax {
                gmax = self.grad[t];
                i = t;
            }
        }

        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        let qii = if i == usize::MAX { 0.0 } else { self.q(i, i) };
        for t in 0..total {
            let (violation, grad_diff) = if self.sign(t) > 0.0 {
                if self.at_lower(t) {
                    continue;
                }
                (self.grad[t], gmax + self.grad[t])
            } else {
                if self.at_upper(t) {
                    continue;
                }
                (-self.grad[t], gmax - self.grad[t])
            };
            gmax2 = gmax2.max(violation);
            if i != usize::MAX && grad_diff > 0.0 {
                let qit = self.sign(i) * self.q(i, t);
                let quad = qii + self.q(t, t) - 2.0 * self.sign(t) * qit;
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tol || i == usize::MAX || j == usize::MAX {
            None
        } else {
            Some((i, j))
        }
    }

    fn update_pair(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let qij = self.q(i, j);
        let (qii, qjj) = (self.q(i, i), self.q(j, j));
        let (mut ai, mut aj) = (old_i, old_j);
        if self.sign(i) != self.sign(j) {
            let quad = qii + qjj + 2.0 * qij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = qii + qjj - 2.0 * qij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        if di == 0.0 && dj == 0.0 {
            return;
        }
        for t in 0..2 * self.n {
            self.grad[t] += self.q(i, t) * di + self.q(j, t) * dj;
        }
    }

    /// Offset `ρ` with decision function `Σ β K − ρ`: the mean of `s_t G_t`
    /// over free variables, or the midpoint of its feasible interval.
    fn rho(&self) -> f64 {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut free_sum = 0.0;
        let mut free = 0usize;
        for t in 0..2 * self.n {
            let yg = self.sign(t) * self.grad[t];
            let positive = self.sign(t) > 0.0;
            if self.at_upper(t) {
                if positive {
                    lb = lb.max(yg);
                } else {
                    ub = ub.min(yg);
                }
            } else if self.at_lower(t) {
                if positive {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                free_sum += yg;
            }
        }
        if free > 0 {
            free_sum / free as f64
        } else {
            0.5 * (ub + lb)
        }
    }
}

/// Fits epsilon-SVR on a square (possibly fairness-transformed) kernel.
pub fn svr_fit(k_train: &KernelMatrix, y: &[f64], params: SvrParams) -> Result<SvrModel> {
    if !k_train.is_square() {
        return Err(Error::InvalidInput(
            "svr needs a square training kernel".into(),
        ));
    }
    let n = k_train.nrows();
    ensure_dims(n, y.len(), "svr targets")?;
    if n == 0 {
        return Err(Error::InvalidInput("svr needs at least one sample".into()));
    }
    params.validate()?;
    let k = convex_kernel(k_train.matrix())?;

    let mut solver = Solver {
        k: &k,
        n,
        c: params.c,
        alpha: vec![0.0; 2 * n],
        grad: (0..2 * n)
            .map(|t| {
                if t < n {
                    params.epsilon - y[t]
                } else {
                    params.epsilon + y[t - n]
                }
            })
            .collect(),
    };

    let cap = MAX_ITER_PER_SAMPLE.saturating_mul(n);
    let mut iterations = 0;
    while let Some((i, j)) = solver.select_pair(params.tol) {
        if iterations >= cap {
            let partial = finish(&solver, params, k_train.column_source().clone(), iterations);
            return Err(Error::NonConvergence {
                iterations,
                gap: partial.duality_gap(&k, y),
            });
        }
        solver.update_pair(i, j);
        iterations += 1;
    }
    Ok(finish(
        &solver,
        params,
        k_train.column_source().clone(),
        iterations,
    ))
}

fn finish(
    solver: &Solver<'_>,
    params: SvrParams,
    fingerprint: Fingerprint,
    iterations: usize,
) -> SvrModel {
    let n = solver.n;
    let beta = DVector::from_fn(n, |i, _| solver.alpha[i] - solver.alpha[i + n]);
    SvrModel {
        support_indices: support_of(&beta),
        dual_coefficients: beta,
        bias: -solver.rho(),
        epsilon: params.epsilon,
        c: params.c,
        train_fingerprint: fingerprint,
        iterations,
    }
}

/// `ŷ = K_cross β + b`.
pub fn svr_predict(model: &SvrModel, k_cross: &KernelMatrix) -> Result<Vec<f64>> {
    check_prediction_kernel(
        k_cross,
        model.dual_coefficients.len(),
        &model.train_fingerprint,
    )?;
    Ok((k_cross.matrix() * &model.dual_coefficients)
        .iter()
        .map(|v| v + model.bias)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{rbf_kernel, FeatureMatrix, RbfParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(n: usize, seed: u64) -> (KernelMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x =
            FeatureMatrix::new(DMatrix::from_fn(n, 2, |_, _| rng.gen_range(-2.0..2.0))).unwrap();
        let y = (0..n)
            .map(|i| x.as_matrix()[(i, 0)].sin() + 0.1 * rng.gen_range(-1.0..1.0))
            .collect();
        (rbf_kernel(&x, RbfParams::new(0.5).unwrap()), y)
    }

    #[test]
    fn constant_target_has_no_support_vectors() {
        let (k, _) = problem(10, 1);
        for eps in [0.0, 0.1] {
            let model = svr_fit(&k, &[2.5; 10], SvrParams::new(eps, 1.0)).unwrap();
            assert!(model.support_indices().is_empty());
            assert!((model.bias() - 2.5).abs() < 1e-12);
            let pred = svr_predict(&model, &k.as_cross()).unwrap();
            assert!(pred.iter().all(|p| (p - 2.5).abs() < 1e-12));
        }
    }

    #[test]
    fn wide_tube_has_no_support_vectors() {
        let (k, y) = problem(15, 2);
        let range = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - y.iter().cloned().fold(f64::INFINITY, f64::min);
        let model = svr_fit(&k, &y, SvrParams::new(range, 1.0)).unwrap();
        assert!(model.support_indices().is_empty());
        assert!(model.dual_coefficients().iter().all(|b| *b == 0.0));
    }

    #[test]
    fn small_instance_duality_gap() {
        let (k, y) = problem(5, 3);
        let model = svr_fit(&k, &y, SvrParams::new(0.01, 0.75).with_tol(1e-10)).unwrap();
        let dual = model.dual_objective(k.matrix(), &y);
        let gap = model.duality_gap(k.matrix(), &y);
        assert!(
            gap >= -1e-9 && gap <= 1e-6 * (1.0 + dual.abs()),
            "gap {gap}, dual {dual}"
        );
    }

    #[test]
    fn feasibility_and_free_vector_kkt() {
        let (k, y) = problem(40, 4);
        let c = 0.75;
        let eps = 0.05;
        let model = svr_fit(&k, &y, SvrParams::new(eps, c).with_tol(1e-9)).unwrap();
        let beta = model.dual_coefficients();
        assert!(beta.iter().all(|b| b.abs() <= c));
        assert!(beta.sum().abs() <= 1e-8 * c * 40.0);
        let pred = svr_predict(&model, &k.as_cross()).unwrap();
        let mut free = 0;
        for (i, b) in beta.iter().enumerate() {
            if *b != 0.0 && b.abs() < c {
                free += 1;
                let residual = (y[i] - pred[i]).abs();
                assert!(
                    (residual - eps).abs() < 1e-6,
                    "free sv {i} residual {residual}"
                );
            }
        }
        assert!(free > 0);
    }

    #[test]
    fn zero_coefficients_predict_bias() {
        let (k, _) = problem(6, 5);
        let model = svr_fit(&k, &[1.0; 6], SvrParams::new(0.5, 1.0)).unwrap();
        let pred = svr_predict(&model, &k.as_cross()).unwrap();
        assert!(pred.iter().all(|p| *p == model.bias()));
    }

    #[test]
    fn duplicated_rows_predict_identically() {
        let (k, y) = problem(12, 6);
        let model = svr_fit(&k, &y, SvrParams::new(0.01, 1.0)).unwrap();
        let dup = KernelMatrix::cross(k.matrix().select_rows(&[3, 3]), k.column_source().clone())
            .unwrap();
        let pred = svr_predict(&model, &dup).unwrap();
        assert_eq!(pred[0], pred[1]);
    }

    #[test]
    fn rejects_indefinite_kernel() {
        let k = KernelMatrix::square(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert!(matches!(
            svr_fit(&k, &[0.0, 1.0], SvrParams::new(0.1, 1.0)),
            Err(Error::NotPositiveSemiDefinite { .. })
        ));
    }

    #[test]
    fn bad_params() {
        let (k, y) = problem(4, 7);
        assert!(svr_fit(&k, &y, SvrParams::new(-0.1, 1.0)).is_err());
        assert!(svr_fit(&k, &y, SvrParams::new(0.1, 0.0)).is_err());
        assert!(svr_fit(&k, &y[..3], SvrParams::new(0.1, 1.0)).is_err());
    }

    #[test]
    fn serialization_round_trip() {
        let (k, y) = problem(10, 8);
        let model = svr_fit(&k, &y, SvrParams::new(0.01, 1.0)).unwrap();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        assert_eq!(SvrModel::read_from(buf.as_slice()).unwrap(), model);
    }
}
