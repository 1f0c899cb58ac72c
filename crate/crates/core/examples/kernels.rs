//! RBF kernels on a small synthetic table: train kernel, cross kernel, PSD check.
use fair_kernel::prelude::*;
use fair_kernel::synthetic::{generate, SyntheticSpec};

fn main() -> Result<()> {
    let data = generate(&SyntheticSpec::new(40, 3))?;
    let train: Vec<usize> = (0..30).collect();
    let test: Vec<usize> = (30..40).collect();
    let (x_train, x_test) = data.split_features(&train, &test)?;

    let rbf = RbfParams::new(0.05)?;
    let k = rbf_kernel(&x_train, rbf);
    k.validate_psd()?;
    let k_cross = rbf_cross_kernel(&x_test, &x_train, rbf)?;

    let m = k.matrix();
    let off_diag = (m.sum() - m.trace()) / (m.len() - m.nrows()) as f64;
    println!(
        "train kernel {}x{}, mean off-diagonal {off_diag:.4}",
        k.nrows(),
        k.ncols()
    );
    println!(
        "cross kernel {}x{}, columns from {:?}",
        k_cross.nrows(),
        k_cross.ncols(),
        k_cross.column_source()
    );

    let lin = linear_kernel(&x_train, &x_train)?;
    println!(
        "linear kernel trace {:.3} (= n·d for standardized features)",
        lin.matrix().trace()
    );
    Ok(())
}
