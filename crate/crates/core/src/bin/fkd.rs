use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fair_kernel::decomposition::FairTransform;
use fair_kernel::experiment::{
    emit_results, emit_sweep, run_experiment_with, sweep_alpha_tilde, sweep_nystroem,
    ExperimentConfig, RunOptions,
};
use fair_kernel::{Error, Result};

#[derive(Parser)]
#[command(name = "fkd", version, about = "Fair kernel decomposition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validated run over the configured m values.
    Run(Common),
    /// One run per alpha_tilde value.
    SweepAlpha {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// One run per landmark fraction plus an exact reference.
    SweepNystroem {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        fractions: Vec<f64>,
    },
    /// Print the header and diagnostics of a saved transform.
    InspectTransform { path: PathBuf },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to `output_path` in the config, then `.`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overrides `cv.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Also write every fitted transform into this directory.
    #[arg(long)]
    save_transforms: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, RunOptions, PathBuf)> {
        let mut config = ExperimentConfig::from_path(&self.config)?;
        if let Some(seed) = self.seed {
            config.cv.seed = seed;
        }
        let output = self
            .output
            .clone()
            .or_else(|| config.output_path.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        let options = RunOptions {
            threads: self.threads,
            transform_dir: self.save_transforms.clone(),
        };
        Ok((config, options, output))
    }
}

fn print_paths(json: &Path, csv: &Path) {
    println!(
        "{}",
        serde_json::json!({ "json": json.display().to_string(), "csv": csv.display().to_string() })
    );
}

fn inspect(path: &Path) -> Result<()> {
    let transform = FairTransform::read_from(BufReader::new(File::open(path)?))?;
    let summary = serde_json::json!({
        "dimension": transform.dimension(),
        "iterations": transform.iterations(),
        "ridge_alpha": transform.ridge_alpha(),
        "factored": transform.is_factored(),
        "source_fingerprint": transform.source_fingerprint(),
        "output_fingerprint": transform.output_fingerprint(),
        "diagnostics": transform.diagnostics(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let (config, options, out) = common.load()?;
            let result = run_experiment_with(&config, &options)?;
            let (json, csv) = emit_results(&result, &out)?;
            print_paths(&json, &csv);
        }
        Command::SweepAlpha { common, values } => {
            let (config, options, out) = common.load()?;
            let (json, csv) = emit_sweep(&sweep_alpha_tilde(&config, &values, &options)?, &out)?;
            print_paths(&json, &csv);
        }
        Command::SweepNystroem { common, fractions } => {
            let (config, options, out) = common.load()?;
            let (json, csv) = emit_sweep(&sweep_nystroem(&config, &fractions, &options)?, &out)?;
            print_paths(&json, &csv);
        }
        Command::InspectTransform { path } => inspect(&path)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::FAILURE
        }
    }
}

fn report(e: &Error) {
    let body = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
    eprintln!("{body}");
}
