//! The four metrics on hand-built prediction vectors.
use fair_kernel::metrics::{evaluate, hgr_spectrum, KdeParams};
use fair_kernel::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 1000;
    let p: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = p.iter().zip(&noise).map(|(a, e)| a + e).collect();
    let kde = KdeParams::default();

    let cases: [(&str, Vec<f64>); 4] = [
        ("constant", vec![0.3; n]),
        ("independent", noise.clone()),
        (
            "half p",
            p.iter().zip(&noise).map(|(a, e)| 0.5 * a + e).collect(),
        ),
        ("y = p", p.clone()),
    ];
    println!(
        "{:<12} {:>8} {:>8} {:>8} {:>8}",
        "prediction", "mae", "gdp", "hgr", "pf"
    );
    for (name, yhat) in &cases {
        let r = evaluate(&y, yhat, &p, &kde)?;
        println!(
            "{name:<12} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            r.mae, r.gdp, r.hgr, r.pairwise_fairness
        );
    }

    let spectrum = hgr_spectrum(&p, &p, &kde)?;
    println!("leading singular values for y = p: {:.4?}", &spectrum[..4]);
    Ok(())
}
