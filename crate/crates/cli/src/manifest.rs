use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance block embedded in every JSON artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub flags: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub inputs: Vec<InputDigest>,
    pub started_at: String,
    pub finished_at: String,
}

pub struct ManifestBuilder {
    command: String,
    argv: Vec<String>,
    flags: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<InputDigest>,
    started: OffsetDateTime,
}

fn timestamp(t: OffsetDateTime) -> String {
    t.format(&Rfc3339).unwrap_or_default()
}

impl ManifestBuilder {
    pub fn new(command: &str, argv: &[String], flags: &impl Serialize, seed: Option<u64>) -> Self {
        ManifestBuilder {
            command: command.into(),
            argv: argv.to_vec(),
            flags: serde_json::to_value(flags).unwrap_or(serde_json::Value::Null),
            seed,
            inputs: Vec::new(),
            started: OffsetDateTime::now_utc(),
        }
    }

    /// Reads `path`, records its digest and returns the bytes.
    pub fn read_input(&mut self, role: &str, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(InputDigest {
            role: role.into(),
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(bytes)
    }

    pub fn finish(&self) -> RunManifest {
        RunManifest {
            command: self.command.clone(),
            argv: self.argv.clone(),
            flags: self.flags.clone(),
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            inputs: self.inputs.clone(),
            started_at: timestamp(self.started),
            finished_at: timestamp(OffsetDateTime::now_utc()),
        }
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn print_json(value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    println!("{text}");
    Ok(())
}
