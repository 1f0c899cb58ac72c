//! Synthetic regression data with a continuous protected attribute that is a
//! smooth function of one feature.
//!
//! ```text
//! x_ij  ~ N(0, 1)
//! s_i   = sin(1.5 x_i0)
//! p_i1  = s_i + σ_p ε
//! p_i2  = ρ s_i + √(1 − ρ²) sin(1.5 x_i1) + σ_p ε      (second attribute)
//! y_i   = s_i + Σ_{j≥1} cos(x_ij) / j + σ_y ε
//! ```

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::TabularDataset;
use crate::decomposition::ProtectedAttributes;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_protected_count")]
    pub protected_count: usize,
    #[serde(default = "default_protected_noise")]
    pub protected_noise: f64,
    #[serde(default = "default_target_noise")]
    pub target_noise: f64,
    /// Weight `ρ` of the shared component in the second attribute.
    #[serde(default = "default_correlation")]
    pub protected_correlation: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_d() -> usize {
    5
}
fn default_protected_count() -> usize {
    1
}
fn default_protected_noise() -> f64 {
    0.3
}
fn default_target_noise() -> f64 {
    0.2
}
fn default_correlation() -> f64 {
    0.6
}

impl SyntheticSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            d: default_d(),
            protected_count: default_protected_count(),
            protected_noise: default_protected_noise(),
            target_noise: default_target_noise(),
            protected_correlation: default_correlation(),
            seed,
        }
    }

    pub fn with_protected_count(mut self, count: usize) -> Self {
        self.protected_count = count;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config("synthetic data needs at least 2 rows".into()));
        }
        if self.d < 2 {
            return Err(Error::Config(
                "synthetic data needs at least 2 features".into(),
            ));
        }
        if !(1..=2).contains(&self.protected_count) {
            return Err(Error::Config(
                "synthetic data supports 1 or 2 protected attributes".into(),
            ));
        }
        if !(-1.0..=1.0).contains(&self.protected_correlation) {
            return Err(Error::Config(
                "protected correlation must lie in [-1, 1]".into(),
            ));
        }
        if !(self.protected_noise >= 0.0 && self.target_noise >= 0.0) {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        Ok(())
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<TabularDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, d) = (spec.n, spec.d);
    let x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let rho = spec.protected_correlation;
    let mut p = DMatrix::zeros(n, spec.protected_count);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let s = (1.5 * x[(i, 0)]).sin();
        p[(i, 0)] = s + spec.protected_noise * rng.sample::<f64, _>(StandardNormal);
        if spec.protected_count == 2 {
            p[(i, 1)] = rho * s
                + (1.0 - rho * rho).sqrt() * (1.5 * x[(i, 1)]).sin()
                + spec.protected_noise * rng.sample::<f64, _>(StandardNormal);
        }
        let rest: f64 = (1..d).map(|j| x[(i, j)].cos() / j as f64).sum();
        y.push(s + rest + spec.target_noise * rng.sample::<f64, _>(StandardNormal));
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    let protected_names = (0..spec.protected_count).map(|j| format!("p{j}")).collect();
    TabularDataset::from_parts(x, names, y, ProtectedAttributes::new(p)?, protected_names)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn shapes_and_determinism() {
        let spec = SyntheticSpec::new(50, 3).with_protected_count(2);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.raw_features.shape(), (50, 5));
        assert_eq!(a.protected.ncols(), 2);
        assert_eq!(a.raw_features, b.raw_features);
        assert_eq!(a.y, b.y);
        assert_ne!(generate(&SyntheticSpec::new(50, 4)).unwrap().y, a.y);
    }

    #[test]
    fn target_and_attributes_are_correlated() {
        let data = generate(&SyntheticSpec::new(2000, 1).with_protected_count(2)).unwrap();
        let (p0, p1) = (data.protected.column(0), data.protected.column(1));
        assert!(corr(&data.y, &p0) > 0.3);
        assert!(corr(&p0, &p1) > 0.3);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate(&SyntheticSpec::new(1, 0)).is_err());
        assert!(generate(&SyntheticSpec::new(10, 0).with_protected_count(3)).is_err());
    }
}
