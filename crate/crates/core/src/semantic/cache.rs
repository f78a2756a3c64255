//! Content-addressed on-disk embedding cache.
//!
//! Each entry lives at `<dir>/<key[..2]>/<key>.emb`, where `key` is the hex
//! SHA-256 of `model \0 text`. File layout (little endian): magic `EMB1`,
//! `u32` dimension, `u16` model-tag length, model tag bytes, then
//! `dimension` `f64` values.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    dir: PathBuf,
}

impl EmbeddingCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(EmbeddingCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn key(model: &str, text: &str) -> String {
        let mut h = Sha256::new();
        h.update(model.as_bytes());
        h.update([0u8]);
        h.update(text.as_bytes());
        hex::encode(h.finalize())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.emb"))
    }

    /// Cached vector, or `None` on a miss or an unreadable entry.
    pub fn get(&self, model: &str, text: &str) -> Option<Vec<f64>> {
        let path = self.path_for(&Self::key(model, text));
        let bytes = fs::read(&path).ok()?;
        match decode(&bytes, model) {
            Some(v) => Some(v),
            None => {
                log::warn!("ignoring corrupt cache entry {}", path.display());
                None
            }
        }
    }

    /// Stores a vector; the write goes through a temporary file and a rename.
    pub fn put(&self, model: &str, text: &str, values: &[f64]) -> Result<()> {
        let key = Self::key(model, text);
        let path = self.path_for(&key);
        let parent = path.parent().expect("entry has a parent directory");
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        let tmp = parent.join(format!(".{key}.{}.tmp", std::process::id()));
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&encode(model, values)).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}

fn encode(model: &str, values: &[f64]) -> Vec<u8> {
    let tag = model.as_bytes();
    let mut out = Vec::with_capacity(10 + tag.len() + 8 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(values.len() as u32).to_le_bytes());
    out.extend_from_slice(&(tag.len() as u16).to_le_bytes());
    out.extend_from_slice(tag);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8], model: &str) -> Option<Vec<f64>> {
    let rest = bytes.strip_prefix(MAGIC)?;
    let (dim, rest) = rest.split_first_chunk::<4>()?;
    let (tag_len, rest) = rest.split_first_chunk::<2>()?;
    let dim = u32::from_le_bytes(*dim) as usize;
    let tag_len = u16::from_le_bytes(*tag_len) as usize;
    let (tag, body) = rest.split_at_checked(tag_len)?;
    if tag != model.as_bytes() || body.len() != dim * 8 {
        return None;
    }
    Some(
        body.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    )
}
