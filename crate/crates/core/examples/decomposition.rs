//! Removes a protected attribute from a training kernel step by step and
//! carries the same transformation over to a test cross kernel.
use fair_kernel::decomposition::Decomposer;
use fair_kernel::prelude::*;
use fair_kernel::synthetic::{generate, SyntheticSpec};

fn main() -> Result<()> {
    let data = generate(&SyntheticSpec::new(200, 1))?;
    let train: Vec<usize> = (0..160).collect();
    let test: Vec<usize> = (160..200).collect();
    let (x_train, x_test) = data.split_features(&train, &test)?;
    let p = data.protected.select_rows(&train)?;

    let rbf = RbfParams::default();
    let k = rbf_kernel(&x_train, rbf);
    let k_cross = rbf_cross_kernel(&x_test, &x_train, rbf)?;

    let mut dec = Decomposer::new(&k, &p, DecompositionParams::new(0, 0.1))?;
    println!(
        "{:>4} {:>12} {:>14} {:>10}",
        "iter", "tau", "residual", "trace"
    );
    for _ in 0..10 {
        let diag = dec.step()?.clone();
        println!(
            "{:>4} {:>12.4e} {:>14.3e} {:>10.3}",
            diag.iteration,
            diag.tau_norm.unwrap_or(f64::NAN),
            diag.residual_norm[0],
            dec.kernel_matrix().trace()
        );
    }

    let transform = dec.transform();
    let fair_cross = apply_transform(&k_cross, &transform)?;
    println!(
        "transformed cross kernel {}x{}",
        fair_cross.nrows(),
        fair_cross.ncols()
    );

    let path = std::env::temp_dir().join("fkd_example_transform.fkt");
    transform.write_to(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
    println!(
        "saved transform to {} (inspect with `fkd inspect-transform`)",
        path.display()
    );
    Ok(())
}
