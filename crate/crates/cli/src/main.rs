use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use spectral_sde_cli::run::SEED_ENV;
use spectral_sde_cli::{parse_config, resolve_seed, run, Command, EXIT_ERROR};

/// Simulates matrix SDEs and their eigenvalue systems, and runs the
/// verification experiments.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// Overrides the `command` key of the config.
    command: Option<Command>,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Do not print the report summary.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match execute(&args) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}

fn execute(args: &Args) -> Result<i32, String> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| format!("{}: {e}", args.config.display()))?;
    let mut config = parse_config(&text).map_err(|e| format!("{}: {e}", args.config.display()))?;
    if let Some(c) = args.command {
        config.command = c;
    }
    if let Some(n) = args.paths {
        if n == 0 {
            return Err("--paths must be at least 1".into());
        }
        config.run.paths = n;
    }
    if let Some(out) = &args.out {
        config.run.out = out.clone();
    }
    if let Some(w) = args.workers {
        config.run.workers = w;
    }
    let env = std::env::var(SEED_ENV).ok();
    let seed = resolve_seed(args.seed.or(config.run.seed), env.as_deref()).map_err(|e| e.to_string())?;
    let report = run(&config, seed).map_err(|e| e.to_string())?;
    if !args.quiet {
        print!("{}", report.summary_text());
    }
    Ok(report.exit_code())
}
