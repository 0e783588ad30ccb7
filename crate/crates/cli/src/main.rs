use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ris_forge_cli::{load_config, run, CliError, Command, RunConfig};

#[derive(Parser)]
#[command(name = "ris-forge", version, about = "Reconfigurable-surface link experiments")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration; omitted fields take the hardware defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn threads_from_env() -> Result<(), CliError> {
    let Ok(v) = std::env::var("RIS_FORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config {
            path: "RIS_FORGE_THREADS".into(),
            message: format!("expected a positive integer, got `{v}`"),
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config {
            path: "RIS_FORGE_THREADS".into(),
            message: e.to_string(),
        })
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    threads_from_env()?;
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.output_dir = Some(o);
    }
    let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let manifest = run(cli.command, &cfg, &out)?;
    println!("{}", serde_json::to_string(&manifest).expect("manifest serializes"));
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
