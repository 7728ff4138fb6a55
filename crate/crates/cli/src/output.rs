//! Atomic output files and the run manifest written next to each of them.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::error::{CliError, CliResult};

/// Writes `path` through a temporary file in the same directory, renamed on success.
pub fn write_atomic<F>(path: &Path, fill: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> CliResult<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        fill(&mut out)?;
        out.flush().map_err(|e| CliError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn digest(path: &Path) -> CliResult<InputDigest> {
    let mut file = open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(hasher.finalize()),
    })
}

/// Provenance record emitted alongside every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config: C,
    pub inputs: Vec<InputDigest>,
}

impl<C: Serialize> RunManifest<C> {
    pub fn new(
        command: &'static str,
        seed: Option<u64>,
        config: C,
        inputs: Vec<InputDigest>,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config,
            inputs,
        }
    }

    /// Writes `<output>.manifest.json`.
    pub fn write_for(&self, output: &Path) -> CliResult<PathBuf> {
        let path = sidecar(output, "manifest.json");
        write_atomic(&path, |w| {
            serde_json::to_writer_pretty(&mut *w, self).map_err(|e| CliError::io(&path, e))?;
            w.write_all(b"\n").map_err(|e| CliError::io(&path, e))
        })?;
        Ok(path)
    }
}

/// `dir/name.ext` → `dir/name.ext.<suffix>`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}
