use std::process::ExitCode;

use clap::Parser;
use gabor_cert::{init_threads, CliError, Overrides, RunConfig, Subcommand, EXIT_INVALID};

#[derive(Debug, Parser)]
#[command(name = "gabor-cert", version, about = "Certify Gabor frames on general lattices")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, clap::Subcommand)]
enum Cmd {
    /// Evaluate the frame certificate (add --verify for the oracle).
    Certify(Overrides),
    /// Certificate plus brute-force eigenvalue check.
    Verify(Overrides),
    /// Poisson summation residual against the truncation radius.
    Poisson(Overrides),
    /// Lattice points in unit cubes against the cofactor bound.
    Count(Overrides),
    /// STFT samples on the time-frequency grid.
    Stft(Overrides),
    /// Series value, counting constants and the mesh threshold.
    Bounds(Overrides),
}

fn run(cli: Cli) -> Result<i32, CliError> {
    init_threads()?;
    let (sub, ov) = match cli.cmd {
        Cmd::Certify(o) => (Subcommand::Certify, o),
        Cmd::Verify(o) => (Subcommand::Verify, o),
        Cmd::Poisson(o) => (Subcommand::Poisson, o),
        Cmd::Count(o) => (Subcommand::Count, o),
        Cmd::Stft(o) => (Subcommand::Stft, o),
        Cmd::Bounds(o) => (Subcommand::Bounds, o),
    };
    let cfg = RunConfig::resolve(&ov)?;
    let (text, outcome) = gabor_cert::run::execute(sub, &cfg, ov.timings)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    eprintln!("{}", outcome.reason);
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
