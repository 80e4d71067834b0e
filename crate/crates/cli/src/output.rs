//! Artifact writing and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: Option<u64>,
    config: Option<FileDigest>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    notes: &'a [&'a str],
    /// Seconds since the Unix epoch; the only field that differs between
    /// otherwise identical runs.
    created_unix: u64,
}

pub const UNITS_NOTE: &str = "monetary values are nominal USD of the survey year, not CPI-adjusted";

/// Records what a command read and wrote.
#[derive(Debug, Default)]
pub struct RunRecord {
    pub config: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunRecord {
    pub fn input(&mut self, p: impl Into<PathBuf>) {
        self.inputs.push(p.into());
    }

    pub fn output(&mut self, p: impl Into<PathBuf>) {
        self.outputs.push(p.into());
    }

    /// Write `manifest.json` with digests of every recorded file.
    pub fn write_manifest(&self, path: &Path, command: &str, seed: Option<u64>) -> Result<(), CliError> {
        let digest = |p: &PathBuf| -> Result<FileDigest, CliError> {
            Ok(FileDigest { path: p.display().to_string(), sha256: sha256_file(p)? })
        };
        let manifest = Manifest {
            tool: "vmt-rebound",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config: self.config.as_ref().map(digest).transpose()?,
            inputs: self.inputs.iter().map(digest).collect::<Result<_, _>>()?,
            outputs: self.outputs.iter().map(digest).collect::<Result<_, _>>()?,
            notes: &[UNITS_NOTE],
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        write_json(path, &manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc.txt");
        write_bytes(&p, b"abc").unwrap();
        assert_eq!(sha256_file(&p).unwrap(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
