//! Command-line front end for `welfare-core`: scenario documents in, CSV and
//! JSON reports out.

pub mod commands;
pub mod document;
pub mod report;

use std::path::{Path, PathBuf};

pub use commands::{run, Command, CommonArgs, Format, Output};
pub use document::{parse_scenario, parse_scenario_str, ScenarioDocument};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

/// Path of the crossings summary written next to `out`.
pub fn summary_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".crossings.csv");
    PathBuf::from(name)
}

/// Runs `command` and writes its artifacts: the main report to `--out` or
/// stdout, the crossings summary beside it or to stderr.
pub fn execute(command: &Command) -> Result<(), CliError> {
    let output = run(command)?;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    match &command.args().out {
        Some(path) => {
            report::write_atomic(path, &output.main)?;
            if let Some(summary) = &output.summary {
                report::write_atomic(&summary_path(path), summary)?;
            }
        }
        None => {
            print!("{}", output.main);
            if let Some(summary) = &output.summary {
                eprint!("{summary}");
            }
        }
    }
    Ok(())
}
