//! Atomic report files and their run manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Writes `bytes` to `path` through a sibling temporary file and a rename,
/// so the target is either absent, the old file, or the complete new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::Builder::new()
        .prefix(".tracereform-")
        .tempfile_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
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
    config: &'a Value,
    inputs: Vec<FileDigest>,
    output: FileDigest,
    summary: &'a Value,
    created_unix_secs: u64,
}

/// Path of the manifest that accompanies `report`.
pub fn manifest_path(report: &Path) -> PathBuf {
    let mut name = report.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    report.with_file_name(name)
}

/// One report output of a subcommand: where it goes and what produced it.
pub struct ReportSink<'a> {
    pub command: &'a str,
    pub config: Value,
    pub inputs: Vec<PathBuf>,
}

impl ReportSink<'_> {
    /// Writes the report (atomically) and then its manifest. Without a path
    /// the report goes to stdout and no manifest is written.
    pub fn emit(&self, out: Option<&Path>, bytes: &[u8], summary: Value) -> Result<()> {
        let Some(out) = out else {
            std::io::stdout().write_all(bytes)?;
            return Ok(());
        };
        let inputs = self
            .inputs
            .iter()
            .map(|p| {
                Ok(FileDigest {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        write_atomic(out, bytes)?;
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config: &self.config,
            inputs,
            output: FileDigest {
                path: out.display().to_string(),
                sha256: hex::encode(Sha256::digest(bytes)),
            },
            summary: &summary,
            created_unix_secs: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let mut text = serde_json::to_vec_pretty(&manifest)?;
        text.push(b'\n');
        write_atomic(&manifest_path(out), &text)?;
        log::info!("wrote {}", out.display());
        Ok(())
    }
}

/// Rejects an output path that coincides with an input (or with another output).
pub fn ensure_distinct(inputs: &[PathBuf], outputs: &[&Path]) -> Result<()> {
    let key = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    for (i, out) in outputs.iter().enumerate() {
        let o = key(out);
        if inputs.iter().any(|p| key(p) == o) {
            bail!("output path {} is also an input", out.display());
        }
        if outputs[..i].iter().any(|p| key(p) == o) {
            bail!("output path {} is given twice", out.display());
        }
    }
    Ok(())
}
