use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edgehall_core::experiment::{
    convergence_study, run, spectrum_scan, with_workers, write_convergence_csv, Axis, RunOptions,
};
use edgehall_core::{Error, ExperimentConfig};

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TOLERANCE: u8 = 3;

#[derive(Parser)]
#[command(name = "edgehall", version, about = "Edge currents and indices of disordered magnetic lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides disorder.master_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments listed in the config.
    Run { config: PathBuf },
    /// List the spectral gaps of the bulk ensemble.
    Scan { config: PathBuf },
    /// Sweep one parameter and tabulate residuals.
    Converge {
        config: PathBuf,
        /// L1, L2, n_t or a.
        #[arg(long)]
        axis: String,
        /// Comma-separated ascending values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
    },
}

fn load(path: &Path, common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.disorder.master_seed = seed;
    }
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn execute(cli: &Cli) -> Result<u8, Error> {
    let common = &cli.common;
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(config, common)?;
            let outcome = run(&cfg, &RunOptions { out_dir: common.out.clone(), workers: common.workers })?;
            let res = &outcome.results;
            for f in &res.failures {
                let at = f.realization.map_or("ensemble".to_string(), |r| format!("realization {r}"));
                eprintln!("warning: {:?} failed at {at}: {}", f.experiment, f.error);
            }
            for v in &res.violations {
                eprintln!("tolerance: {v}");
            }
            if !res.complete() {
                eprintln!("partial completion: {} failure(s)", res.failures.len());
            }
            println!("wrote {}", common.out.display());
            let failed = !res.violations.is_empty() || !res.complete();
            Ok(if cfg.run.assert && failed { EXIT_TOLERANCE } else { 0 })
        }
        Command::Scan { config } => {
            let cfg = load(config, common)?;
            let gaps = with_workers(common.workers, || spectrum_scan(&cfg))??;
            std::fs::create_dir_all(&common.out)?;
            let json = serde_json::json!({ "config_hash": cfg.hash(), "gaps": gaps });
            std::fs::write(common.out.join("gaps.json"), serde_json::to_string_pretty(&json).unwrap() + "\n")?;
            for (i, g) in gaps.iter().enumerate() {
                println!("gap {}: [{:.6}, {:.6}] width {:.6}", i + 1, g.lower_edge, g.upper_edge, g.width());
            }
            if gaps.is_empty() {
                println!("no gap wider than {}", cfg.gap.scan_threshold);
            }
            Ok(0)
        }
        Command::Converge { config, axis, values } => {
            let cfg = load(config, common)?;
            let axis: Axis = axis.parse()?;
            let rows = with_workers(common.workers, || convergence_study(&cfg, axis, values))??;
            let path = common.out.join(format!("convergence_{axis}.csv"));
            write_convergence_csv(&path, &cfg.hash(), axis, &rows)?;
            for r in &rows {
                println!("{axis} = {}: residual {:.3e}", r.value, r.residual);
            }
            println!("wrote {}", path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
