//! Accuracy of the landmark approximation of (K + αI)⁻¹ and its effect on the
//! fairness decomposition.
use fair_kernel::prelude::*;
use fair_kernel::synthetic::{generate, SyntheticSpec};
use nalgebra::DMatrix;

fn main() -> Result<()> {
    let data = generate(&SyntheticSpec::new(300, 5))?;
    let k = rbf_kernel(&data.features(), RbfParams::default());
    let alpha = 0.05;
    let n = k.nrows();
    let exact = (k.matrix() + DMatrix::identity(n, n) * alpha)
        .try_inverse()
        .expect("regularized kernel is invertible");
    let (k_exact, _) = decompose(&k, &data.protected, DecompositionParams::new(5, alpha))?;

    println!(
        "{:>9} {:>14} {:>16}",
        "fraction", "inverse err", "kernel diff m=5"
    );
    for fraction in [0.05, 0.1, 0.25, 0.5, 1.0] {
        let count = ((fraction * n as f64).ceil() as usize).max(1);
        let approx = nystroem_inverse(&k, alpha, &NystroemParams::new(count, 42))?;
        let rel = (&approx - &exact).norm() / exact.norm();
        let params = DecompositionParams::new(5, alpha).with_inverse_mode(InverseMode::Nystroem {
            landmark_count: count,
            seed: 42,
        });
        let (k_approx, _) = decompose(&k, &data.protected, params)?;
        let diff = (k_approx.matrix() - k_exact.matrix()).norm() / k_exact.matrix().norm();
        println!("{fraction:>9} {rel:>14.3e} {diff:>16.3e}");
    }
    Ok(())
}
