use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nanojet::config::{validate_config, Mode, Overrides};
use nanojet::runner::run;
use nanojet::Error;

#[derive(Parser)]
#[command(name = "nanojet", version, about = "Photonic nanojet lens design and uncertainty analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic lens design.
    DesignDet(Common),
    /// Mean-variance design over sampled manufacturing errors.
    DesignOuu(Common),
    /// Feature statistics of a design under sampled errors.
    ForwardUq(Common),
    /// Single forward solve.
    ForwardSolve(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::DesignDet(a) => (Mode::DesignDet, a),
        Command::DesignOuu(a) => (Mode::DesignOuu, a),
        Command::ForwardUq(a) => (Mode::ForwardUq, a),
        Command::ForwardSolve(a) => (Mode::ForwardSolve, a),
    };

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    let overrides = Overrides { mode: Some(mode), output: args.output, seed: args.seed, threads: args.threads };
    let config = match validate_config(&text, &overrides) {
        Ok(c) => c,
        Err(Error::Parse { message, .. }) => {
            eprintln!("error: {}: {message}", args.config.display());
            return ExitCode::from(1);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    match run(&config) {
        Ok(report) => {
            log::info!("wrote {} files to {}", report.files.len(), report.output.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(2)
        }
    }
}
