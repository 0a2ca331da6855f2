use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use moire_relax::{run, CliError, Mode, RunConfig};

/// Relax one-dimensional moire bilayers and write CSV/SVG results.
#[derive(Debug, Parser)]
#[command(name = "moire-relax", version)]
struct Args {
    mode: Mode,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum number of concurrent sweep entries.
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed of the random initial perturbation.
    #[arg(long)]
    seed: Option<u64>,
    /// Exit with status 0 even when a relaxation did not converge.
    #[arg(long)]
    allow_nonconverged: bool,
}

fn resolve(args: &Args) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::load(&args.config)?;
    config.mode = Some(args.mode);
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if args.jobs.is_some() {
        config.jobs = args.jobs;
    }
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    config.allow_nonconverged |= args.allow_nonconverged;
    Ok(config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let outcome = resolve(&args).and_then(|config| run(&config).map(|record| (config, record)));
    match outcome {
        Ok((config, record)) => {
            for file in &record.files {
                println!("{}", file.display());
            }
            if !record.converged {
                let level = if config.allow_nonconverged {
                    "warning"
                } else {
                    "error"
                };
                eprintln!("{level}: {} did not converge", record.mode);
            }
            ExitCode::from(record.exit_code(config.allow_nonconverged) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
