//! α̃ sensitivity and Nystroem degradation sweeps on synthetic data.
use fair_kernel::decomposition::TransformStorage;
use fair_kernel::experiment::*;
use fair_kernel::synthetic::SyntheticSpec;
use fair_kernel::Result;

fn main() -> Result<()> {
    let config = ExperimentConfig {
        name: Some("sensitivity".into()),
        dataset: DataSource::Synthetic(SyntheticSpec::new(300, 3)),
        model: ModelConfig::Krr { alpha: 0.25 },
        kernel: KernelConfig::default(),
        decomposition: DecompositionConfig {
            alpha_tilde: None,
            m_values: vec![0, 3],
            inverse_mode: InverseConfig::Exact,
            standardize_protected: true,
            storage: TransformStorage::Dense,
        },
        cv: CvConfig::default(),
        metrics: MetricsConfig::default(),
        output_path: None,
        record_timings: false,
    };
    let options = RunOptions::default();

    let alpha = sweep_alpha_tilde(&config, &[1e-3, 0.1, 10.0], &options)?;
    println!("alpha_tilde   mae(m=0)  mae(m=3)  gdp(m=0)  gdp(m=3)");
    for e in &alpha.entries {
        let (mae, gdp) = (e.result.means("mae"), e.result.means("gdp"));
        println!(
            "{:>11} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            e.value, mae[0], mae[1], gdp[0], gdp[1]
        );
    }

    let nys = sweep_nystroem(&config, &[0.1, 0.25, 0.5], &options)?;
    println!("\nfraction  m  metric               delta vs exact");
    for d in nys.deltas.iter().filter(|d| d.m == 3) {
        println!(
            "{:>8} {:>2}  {:<20} {:>+.3e}",
            d.value, d.m, d.metric, d.delta
        );
    }
    Ok(())
}
