//! Cross-validated accuracy/fairness trade-off over m, read from a JSON config.
//!
//! cargo run --release --example pareto_sweep -- examples/configs/synthetic_svr.json [out_dir]
use std::path::PathBuf;

use fair_kernel::experiment::{emit_results, metric_names, run_experiment, ExperimentConfig};
use fair_kernel::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let config_path = args.next().map(PathBuf::from).unwrap_or_else(|| {
        concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/examples/configs/synthetic_svr.json"
        )
        .into()
    });
    let config = ExperimentConfig::from_path(&config_path)?;
    let result = run_experiment(&config)?;

    let names = metric_names(&result.protected_names);
    print!("{:>4}", "m");
    for name in &names {
        print!(" {name:>22}");
    }
    println!();
    for agg in &result.aggregates {
        print!("{:>4}", agg.m);
        for s in &agg.metrics {
            print!(" {:>13.4} ± {:<6.4}", s.mean, s.std);
        }
        println!();
    }
    for w in &result.warnings {
        println!("warning: {w}");
    }
    if let Some(dir) = args.next() {
        let (json, csv) = emit_results(&result, dir.as_ref())?;
        println!("wrote {} and {}", json.display(), csv.display());
    }
    Ok(())
}
