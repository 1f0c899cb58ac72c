//! Accuracy and continuous-fairness measures.
//!
//! * [`gdp`]: mean absolute deviation of the Nadaraya–Watson local
//!   prediction average `m̂(p)` from the global prediction mean.
//! * [`hgr_estimate`]: second singular value of the normalized joint pmf
//!   obtained from a product-Gaussian KDE on a square grid.
//! * [`pairwise_fairness`]: gap in pair-ordering accuracy between pairs
//!   ordered one way or the other by the protected attribute.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dims, Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 64;
const GRID_HALF_WIDTH: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `1.06 σ̂ n^{-1/5}` per variable.
    #[default]
    Silverman,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdeParams {
    #[serde(default)]
    pub bandwidth: Bandwidth,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
}

fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}

impl Default for KdeParams {
    fn default() -> Self {
        Self {
            bandwidth: Bandwidth::Silverman,
            grid_size: DEFAULT_GRID_SIZE,
        }
    }
}

impl KdeParams {
    pub fn validate(&self) -> Result<()> {
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "bandwidth must be positive, got {h}"
                )));
            }
        }
        if self.grid_size < 8 {
            return Err(Error::InvalidInput(format!(
                "grid size must be at least 8, got {}",
                self.grid_size
            )));
        }
        Ok(())
    }

    fn bandwidth_for(&self, values: &[f64]) -> f64 {
        match self.bandwidth {
            Bandwidth::Fixed(h) => h,
            Bandwidth::Silverman => silverman_bandwidth(values),
        }
    }
}

/// Scores of one prediction vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae: f64,
    pub gdp: f64,
    pub hgr: f64,
    pub pairwise_fairness: f64,
    pub sample_count: usize,
}

impl MetricReport {
    pub const NAMES: [&'static str; 4] = ["mae", "gdp", "hgr", "pairwise_fairness"];

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "mae" => Some(self.mae),
            "gdp" => Some(self.gdp),
            "hgr" => Some(self.hgr),
            "pairwise_fairness" => Some(self.pairwise_fairness),
            _ => None,
        }
    }
}

/// Scores `yhat` against targets and one protected column. Every measure sees
/// the same predictions.
pub fn evaluate(y: &[f64], yhat: &[f64], p: &[f64], kde: &KdeParams) -> Result<MetricReport> {
    ensure_dims(y.len(), p.len(), "protected values")?;
    Ok(MetricReport {
        mae: mae(y, yhat)?,
        gdp: gdp(yhat, p, kde)?,
        // A constant predictor is independent of p; the estimator itself is undefined there.
        hgr: if is_constant(yhat) {
            0.0
        } else {
            hgr_estimate(yhat, p, kde)?
        },
        pairwise_fairness: pairwise_fairness(y, yhat, p)?,
        sample_count: y.len(),
    })
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1.0).max(1.0)).sqrt()
}

pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    1.06 * sample_std(values) * (values.len() as f64).powf(-0.2)
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} contain non-finite values"
        )));
    }
    Ok(())
}

fn is_constant(values: &[f64]) -> bool {
    values.iter().all(|&v| v == values[0])
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::InvalidInput("mae needs at least one sample".into()));
    }
    ensure_dims(y.len(), yhat.len(), "predictions")?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Generalized demographic parity, `(1/n) Σ_j |m̂(p_j) − m̄|`.
pub fn gdp(yhat: &[f64], p: &[f64], kde: &KdeParams) -> Result<f64> {
    kde.validate()?;
    ensure_dims(yhat.len(), p.len(), "protected values")?;
    if yhat.len() < 2 {
        return Err(Error::InvalidInput("gdp needs at least two samples".into()));
    }
    check_finite(yhat, "predictions")?;
    check_finite(p, "protected values")?;
    if is_constant(p) {
        return Err(Error::InvalidInput(
            "gdp is undefined for a constant protected attribute".into(),
        ));
    }
    let h = kde.bandwidth_for(p);
    // Centering on the first prediction makes constant predictions score 0
    // without rounding.
    let shift = yhat[0];
    let centered: Vec<f64> = yhat.iter().map(|v| v - shift).collect();
    let global = centered.iter().sum::<f64>() / centered.len() as f64;
    let inv = 1.0 / h;
    let deviations: Vec<f64> = p
        .par_iter()
        .map(|&z| {
            let (mut num, mut den) = (0.0, 0.0);
            for (&pi, &yi) in p.iter().zip(&centered) {
                let u = (z - pi) * inv;
                let w = (-0.5 * u * u).exp();
                num += w * yi;
                den += w;
            }
            (num / den - global).abs()
        })
        .collect();
    Ok(deviations.iter().sum::<f64>() / deviations.len() as f64)
}

fn kde_grid(values: &[f64], h: f64, size: usize) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let half = GRID_HALF_WIDTH * (var + h * h).sqrt();
    let step = 2.0 * half / (size - 1) as f64;
    (0..size).map(|i| mean - half + step * i as f64).collect()
}

fn gaussian_weights(grid: &[f64], values: &[f64], h: f64) -> DMatrix<f64> {
    DMatrix::from_fn(grid.len(), values.len(), |a, i| {
        let u = (grid[a] - values[i]) / h;
        (-0.5 * u * u).exp()
    })
}

/// Singular values of `Q̃_ab = Q_ab / √(r_a c_b)`, descending, where `Q` is
/// the grid KDE joint pmf of `(yhat, p)`.
pub fn hgr_spectrum(yhat: &[f64], p: &[f64], kde: &KdeParams) -> Result<Vec<f64>> {
    kde.validate()?;
    ensure_dims(yhat.len(), p.len(), "protected values")?;
    if yhat.len() < 10 {
        return Err(Error::InvalidInput("hgr needs at least ten samples".into()));
    }
    check_finite(yhat, "predictions")?;
    check_finite(p, "protected values")?;
    if is_constant(yhat) || is_constant(p) {
        return Err(Error::InvalidInput(
            "hgr is undefined for constant inputs".into(),
        ));
    }
    let size = kde.grid_size;
    let (hy, hp) = (kde.bandwidth_for(yhat), kde.bandwidth_for(p));
    let a = gaussian_weights(&kde_grid(yhat, hy, size), yhat, hy);
    let b = gaussian_weights(&kde_grid(p, hp, size), p, hp);
    let mut q = a * b.transpose();
    let total = q.sum();
    q /= total;
    let rows: Vec<f64> = q.row_iter().map(|r| r.sum()).collect();
    let cols: Vec<f64> = q.column_iter().map(|c| c.sum()).collect();
    let normalized = DMatrix::from_fn(size, size, |i, j| {
        let d = (rows[i] * cols[j]).sqrt();
        if d > 0.0 {
            q[(i, j)] / d
        } else {
            0.0
        }
    });
    let mut sv: Vec<f64> = normalized.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    Ok(sv)
}

/// HGR maximal correlation estimate in `[0, 1]`.
pub fn hgr_estimate(yhat: &[f64], p: &[f64], kde: &KdeParams) -> Result<f64> {
    let sv = hgr_spectrum(yhat, p, kde)?;
    Ok(sv.get(1).copied().unwrap_or(0.0).clamp(0.0, 1.0))
}

fn order_score(a: f64, b: f64) -> f64 {
    match a.partial_cmp(&b) {
        Some(std::cmp::Ordering::Greater) => 1.0,
        Some(std::cmp::Ordering::Equal) => 0.5,
        _ => 0.0,
    }
}

/// Pair-ordering accuracy for the two protected orderings, `(acc_A, acc_B)`.
/// Over pairs with `y_i > y_j`, group A has `p_i > p_j` and group B
/// `p_i < p_j`; ties in `p` put half a pair in each group and ties in `yhat`
/// count as half correct.
pub fn pairwise_accuracies(y: &[f64], yhat: &[f64], p: &[f64]) -> Result<(f64, f64)> {
    ensure_dims(y.len(), yhat.len(), "predictions")?;
    ensure_dims(y.len(), p.len(), "protected values")?;
    if y.len() < 2 {
        return Err(Error::InvalidInput(
            "pairwise fairness needs at least two samples".into(),
        ));
    }
    check_finite(y, "targets")?;
    check_finite(yhat, "predictions")?;
    check_finite(p, "protected values")?;
    let n = y.len();
    let sums: Vec<[f64; 4]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = [0.0; 4];
            for j in 0..n {
                if !(y[i] > y[j]) {
                    continue;
                }
                let in_a = order_score(p[i], p[j]);
                let correct = order_score(yhat[i], yhat[j]);
                acc[0] += in_a * correct;
                acc[1] += in_a;
                acc[2] += (1.0 - in_a) * correct;
                acc[3] += 1.0 - in_a;
            }
            acc
        })
        .collect();
    let mut total = [0.0; 4];
    for s in sums {
        for (t, v) in total.iter_mut().zip(s) {
            *t += v;
        }
    }
    if total[1] == 0.0 || total[3] == 0.0 {
        return Err(Error::InvalidInput(
            "pairwise fairness needs ordered pairs in both protected groups".into(),
        ));
    }
    Ok((total[0] / total[1], total[2] / total[3]))
}

pub fn pairwise_fairness(y: &[f64], yhat: &[f64], p: &[f64]) -> Result<f64> {
    let (a, b) = pairwise_accuracies(y, yhat, p)?;
    Ok((a - b).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
        let (a, b) = (normals(37, 1), normals(37, 2));
        let mut brute = 0.0;
        for i in 0..37 {
            brute += (a[i] - b[i]).abs();
        }
        assert!((mae(&a, &b).unwrap() - brute / 37.0).abs() < 1e-14);
    }

    #[test]
    fn gdp_of_constant_predictions_is_zero() {
        let p = normals(200, 3);
        assert_eq!(
            gdp(&vec![3.7; 200], &p, &KdeParams::default()).unwrap(),
            0.0
        );
        assert!(gdp(&p, &vec![1.0; 200], &KdeParams::default()).is_err());
    }

    #[test]
    fn gdp_matches_grid_integration() {
        // Oracle: integrate |m̂(z) − m̄| against the KDE density of p on a
        // dense grid, with the same bandwidth.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p: Vec<f64> = (0..500).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = p.iter().sum::<f64>() / 500.0;
        let std = (p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 500.0).sqrt();
        let ps: Vec<f64> = p.iter().map(|v| (v - mean) / std).collect();
        let h = silverman_bandwidth(&ps);
        let local = |z: f64| {
            let (mut num, mut den) = (0.0, 0.0);
            for &v in &ps {
                let w = (-0.5 * ((z - v) / h).powi(2)).exp();
                num += w * v;
                den += w;
            }
            (num / den, den)
        };
        let global = ps.iter().sum::<f64>() / 500.0;
        let (lo, hi, steps) = (-2.5, 2.5, 4000);
        let dz = (hi - lo) / steps as f64;
        let (mut integral, mut mass) = (0.0, 0.0);
        for s in 0..=steps {
            let z = lo + dz * s as f64;
            let (m, density) = local(z);
            integral += (m - global).abs() * density;
            mass += density;
        }
        let oracle = integral / mass;
        let value = gdp(&ps, &ps, &KdeParams::default()).unwrap();
        assert!(
            (value - oracle).abs() <= 0.05 * oracle,
            "{value} vs {oracle}"
        );
    }

    #[test]
    fn gdp_shift_invariant() {
        let (y, p) = (normals(300, 5), normals(300, 6));
        let kde = KdeParams::default();
        let shifted: Vec<f64> = y.iter().map(|v| v + 12.5).collect();
        assert!((gdp(&y, &p, &kde).unwrap() - gdp(&shifted, &p, &kde).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn hgr_top_singular_value_is_one() {
        let (y, p) = (normals(300, 7), normals(300, 8));
        let sv = hgr_spectrum(&y, &p, &KdeParams::default()).unwrap();
        assert!((sv[0] - 1.0).abs() < 1e-8);
        let h = hgr_estimate(&y, &p, &KdeParams::default()).unwrap();
        assert!((0.0..=1.0).contains(&h));
    }

    #[test]
    fn hgr_affine_invariant() {
        let (y, p) = (normals(400, 9), normals(400, 10));
        let mixed: Vec<f64> = y.iter().zip(&p).map(|(a, b)| a + b).collect();
        let scaled: Vec<f64> = mixed.iter().map(|v| 3.0 * v - 2.0).collect();
        let kde = KdeParams::default();
        let a = hgr_estimate(&mixed, &p, &kde).unwrap();
        let b = hgr_estimate(&scaled, &p, &kde).unwrap();
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn hgr_rejects_constant_input() {
        let p = normals(50, 11);
        assert!(hgr_estimate(&vec![0.0; 50], &p, &KdeParams::default()).is_err());
        assert!(hgr_estimate(&p[..5], &p[..5], &KdeParams::default()).is_err());
    }

    fn brute_pairwise(y: &[f64], yhat: &[f64], p: &[f64]) -> f64 {
        let (mut ca, mut na, mut cb, mut nb) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] <= y[j] {
                    continue;
                }
                let c = if yhat[i] > yhat[j] {
                    1.0
                } else if yhat[i] == yhat[j] {
                    0.5
                } else {
                    0.0
                };
                if p[i] > p[j] {
                    ca += c;
                    na += 1.0;
                } else if p[i] < p[j] {
                    cb += c;
                    nb += 1.0;
                } else {
                    ca += 0.5 * c;
                    na += 0.5;
                    cb += 0.5 * c;
                    nb += 0.5;
                }
            }
        }
        (ca / na - cb / nb).abs()
    }

    #[test]
    fn pairwise_three_point_instance() {
        // Pairs with y_i > y_j: (1,0), (2,0), (2,1).
        // p puts (1,0) and (2,0) in A, (2,1) in B; yhat gets only (2,1) wrong.
        let y = [0.0, 1.0, 2.0];
        let p = [0.0, 2.0, 1.0];
        let yhat = [0.0, 2.0, 1.0];
        let pf = pairwise_fairness(&y, &yhat, &p).unwrap();
        assert_eq!(pf, 1.0);
        assert!((pf - brute_pairwise(&y, &yhat, &p)).abs() < 1e-15);
    }

    #[test]
    fn pairwise_matches_brute_force_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let y: Vec<f64> = (0..40).map(|_| rng.gen_range(0..5) as f64).collect();
        let yhat: Vec<f64> = (0..40).map(|_| rng.gen_range(0..4) as f64).collect();
        let p: Vec<f64> = (0..40).map(|_| rng.gen_range(0..3) as f64).collect();
        let pf = pairwise_fairness(&y, &yhat, &p).unwrap();
        assert!((pf - brute_pairwise(&y, &yhat, &p)).abs() < 1e-12);
    }

    #[test]
    fn pairwise_constant_predictions_give_equal_accuracies() {
        let (y, p) = (normals(100, 13), normals(100, 14));
        let (a, b) = pairwise_accuracies(&y, &vec![1.0; 100], &p).unwrap();
        assert_eq!(a, 0.5);
        assert_eq!(b, 0.5);
    }

    #[test]
    fn pairwise_adversarial_approaches_one() {
        // y sorted by p, yhat anti-sorted: group A pairs are always wrong,
        // group B is empty except for ties, so use two interleaved blocks.
        let n = 200;
        let p: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64 * 100.0 + i as f64).collect();
        let yhat: Vec<f64> = (0..n).map(|i| -(i as f64)).collect();
        let pf = pairwise_fairness(&y, &yhat, &p).unwrap();
        assert!(pf > 0.95, "{pf}");
    }

    #[test]
    fn pairwise_rank_invariant() {
        let (y, yhat, p) = (normals(80, 15), normals(80, 16), normals(80, 17));
        let base = pairwise_fairness(&y, &yhat, &p).unwrap();
        let ty: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        let tyh: Vec<f64> = yhat.iter().map(|v| v * v * v + 2.0).collect();
        let tp: Vec<f64> = p.iter().map(|v| v.atan()).collect();
        assert_eq!(base, pairwise_fairness(&ty, &tyh, &tp).unwrap());
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let (y, yhat, p) = (normals(60, 18), normals(60, 19), normals(60, 20));
        let kde = KdeParams::default();
        let base = evaluate(&y, &yhat, &p, &kde).unwrap();
        let perm: Vec<usize> = (0..60).rev().collect();
        let pick = |v: &[f64]| perm.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let other = evaluate(&pick(&y), &pick(&yhat), &pick(&p), &kde).unwrap();
        assert!((base.mae - other.mae).abs() < 1e-12);
        assert!((base.gdp - other.gdp).abs() < 1e-12);
        assert!((base.hgr - other.hgr).abs() < 1e-9);
        assert!((base.pairwise_fairness - other.pairwise_fairness).abs() < 1e-12);
    }

    #[test]
    fn kde_params_validation() {
        assert!(KdeParams {
            bandwidth: Bandwidth::Fixed(0.0),
            grid_size: 64
        }
        .validate()
        .is_err());
        assert!(KdeParams {
            bandwidth: Bandwidth::Silverman,
            grid_size: 4
        }
        .validate()
        .is_err());
        assert!(KdeParams::default().validate().is_ok());
    }
}
