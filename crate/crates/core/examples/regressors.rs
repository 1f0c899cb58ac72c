//! KRR, ε-SVR and the mean baseline on plain and fairness-transformed kernels.
use fair_kernel::metrics::mae;
use fair_kernel::prelude::*;
use fair_kernel::synthetic::{generate, SyntheticSpec};

fn main() -> Result<()> {
    let data = generate(&SyntheticSpec::new(250, 2))?;
    let train: Vec<usize> = (0..200).collect();
    let test: Vec<usize> = (200..250).collect();
    let (x_train, x_test) = data.split_features(&train, &test)?;
    let (y_train, y_test) = (data.select_y(&train), data.select_y(&test));
    let p = data.protected.select_rows(&train)?;

    let rbf = RbfParams::default();
    let k = rbf_kernel(&x_train, rbf);
    let k_cross = rbf_cross_kernel(&x_test, &x_train, rbf)?;

    let baseline = dummy_fit(&y_train)?;
    println!(
        "dummy    mae {:.4}",
        mae(&y_test, &dummy_predict(&baseline, test.len()))?
    );

    for m in [0, 5, 20] {
        let (k_m, t) = decompose(&k, &p, DecompositionParams::new(m, 0.05))?;
        let k_cross_m = apply_transform(&k_cross, &t)?;

        let krr = krr_fit(&k_m, &y_train, 0.25)?;
        let svr = svr_fit(&k_m, &y_train, SvrParams::new(0.01, 0.75))?;
        println!(
            "m = {m:>2}  krr mae {:.4}  svr mae {:.4}  ({} support vectors, gap {:.1e})",
            mae(&y_test, &krr_predict(&krr, &k_cross_m)?)?,
            mae(&y_test, &svr_predict(&svr, &k_cross_m)?)?,
            svr.support_indices().len(),
            svr.duality_gap(k_m.matrix(), &y_train),
        );
    }
    Ok(())
}
