use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use vibratrak_cli::{execute, parse_config, CliError, Mode, RunOptions};

/// Harmonic balance frequency responses and superharmonic resonance
/// backbones of forced single-degree-of-freedom oscillators.
#[derive(Debug, Parser)]
#[command(name = "vibratrak", version)]
struct Args {
    /// What to compute.
    #[arg(value_enum)]
    mode: Mode,
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent force levels.
    #[arg(long, env = "VIBRATRAK_THREADS")]
    threads: Option<usize>,
    /// Multiplier on every continuation step size.
    #[arg(long, default_value_t = 1.0)]
    step_scale: f64,
}

fn run(args: &Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    let mut cfg = parse_config(&text, Some(args.mode))?;
    if let Some(dir) = &args.out {
        cfg.out_dir = dir.clone();
    }
    let opts = RunOptions {
        threads: args.threads.filter(|&n| n > 0),
        step_scale: args.step_scale,
    };
    let report = execute(&cfg, &opts)?;
    for f in &report.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vibratrak: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
