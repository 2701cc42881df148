//! Command line surface for selective post-clustering inference: CSV data
//! ingestion, cluster/test/oracle-check/simulate commands, JSON and CSV
//! results, and a minimal SVG QQ plot.
//!
//! Row and cluster indices are 1-based everywhere the user sees them;
//! clusters at the cut are numbered by their smallest member, so "pair 1,3"
//! names the same clusters on every run.

pub mod args;
pub mod commands;
pub mod io;
pub mod svg;

/// A command failure carrying its process exit code.
///
/// Exit codes are a stable contract: 0 success, 1 oracle mismatch, 2
/// configuration error, 3 data error, 4 numerical degeneracy.
#[derive(Debug)]
pub enum CliError {
    /// Inconsistent or unsupported flag combination. Exit code 2.
    Config(String),
    /// Unreadable, malformed, or non-finite input. Exit code 3.
    Data(String),
    /// The requested quantity is numerically degenerate. Exit code 4.
    Degenerate(String),
    /// An oracle comparison found disagreements. Exit code 1.
    Mismatch(String),
}

impl CliError {
    /// The process exit code this error maps to.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Mismatch(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Degenerate(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Degenerate(m) => write!(f, "degeneracy: {m}"),
            CliError::Mismatch(m) => write!(f, "mismatch: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<postclust::Error> for CliError {
    fn from(e: postclust::Error) -> CliError {
        let message = e.to_string();
        match e.code() {
            "invalid_data" | "not_positive_definite" => CliError::Data(message),
            "degenerate_direction" | "degenerate_support" | "unstable_estimate" => {
                CliError::Degenerate(message)
            }
            _ => CliError::Config(message),
        }
    }
}
