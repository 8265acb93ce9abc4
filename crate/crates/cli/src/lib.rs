//! Batch front end of the Gabor frame certifier: configuration, pipelines
//! and report emission.

pub mod config;
pub mod report;
pub mod run;

use thiserror::Error;

pub use config::{Format, Overrides, RunConfig};
pub use run::{Outcome, Subcommand};

/// Exit code of a certified run.
pub const EXIT_CERTIFIED: i32 = 0;
/// Exit code when the sufficient condition does not fire.
pub const EXIT_INCONCLUSIVE: i32 = 1;
/// Exit code of invalid input.
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] gabor_core::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("lattice is not aligned with the grid: {reason}{}", suggestion_text(.suggestion))]
    Misaligned {
        reason: String,
        suggestion: Option<(f64, usize)>,
    },
    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn suggestion_text(s: &Option<(f64, usize)>) -> String {
    match s {
        Some((r, n)) => format!("; try --grid-R {r} --grid-N {n}"),
        None => String::new(),
    }
}

impl CliError {
    /// Numerical failures leave the question open (1); everything else is
    /// a problem with the input (2).
    pub fn exit_code(&self) -> i32 {
        use gabor_core::Error as E;
        match self {
            CliError::Core(
                E::NoConvergence { .. }
                | E::TruncationWarning { .. }
                | E::NonDecaying { .. }
                | E::ConditionFailed { .. },
            ) => EXIT_INCONCLUSIVE,
            _ => EXIT_INVALID,
        }
    }
}

/// Caps rayon's global pool at `GABOR_CERT_THREADS` workers when set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("GABOR_CERT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Config(format!("GABOR_CERT_THREADS='{v}' is not a positive integer")))?;
    // a second initialization (tests in one process) keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
