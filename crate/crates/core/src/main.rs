use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rkl_core::cli::{exit_code, run, RunConfig};
use rkl_core::LabError;

/// Run one resolvent-kernel lab command described by a TOML config.
#[derive(Parser)]
#[command(name = "rkl", version)]
struct Args {
    /// Run configuration (TOML).
    config: PathBuf,
    /// Override a config entry, e.g. `--set params.lambda=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(threads) = std::env::var("RKL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let result = RunConfig::load(&args.config, &args.set).and_then(|cfg| run(&cfg));
    match result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            if let LabError::CharacteristicValue { lambda, abs_det } = &err {
                eprintln!("rkl: characteristic value at lambda = {lambda} (|D| = {abs_det:e})");
            } else {
                eprintln!("rkl: {err}");
            }
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
