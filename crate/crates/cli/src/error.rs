use std::path::Path;

use gcr_core::error::{ErrorKind, GcrError};
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(GcrError),
    Input(String),
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 4,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Input(_) => "input",
            CliError::NotConverged(_) => "no_convergence",
            CliError::Core(e) => e.tag(),
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::NotConverged(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }

    /// One JSON line on stderr.
    pub fn report(&self) {
        let line = json!({
            "error": { "exit_code": self.exit_code(), "kind": self.kind(), "message": self.message() }
        });
        eprintln!("{line}");
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
        CliError::Input(format!("{}: {e}", path.display()))
    }
}

impl From<GcrError> for CliError {
    fn from(e: GcrError) -> Self {
        CliError::Core(e)
    }
}

/// Rejects NaN or infinite values before they reach a JSON artifact.
pub fn ensure_finite<'a>(what: &str, values: impl IntoIterator<Item = &'a f64>) -> Result<(), CliError> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CliError::Core(GcrError::Numerical(format!("{what} is not finite"))))
    }
}
