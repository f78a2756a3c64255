use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::bounded_map;

use super::{EmbeddingCache, EmbeddingVector, Family};

/// A text-embedding backend.
pub trait EmbeddingClient: Send + Sync {
    /// One vector per input text, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;

    /// Model tag used for cache keys.
    fn model(&self) -> &str;
}

impl<C: EmbeddingClient + ?Sized> EmbeddingClient for Box<C> {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        (**self).embed(texts)
    }

    fn model(&self) -> &str {
        (**self).model()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedConfig {
    pub batch_size: usize,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub concurrency_limit: usize,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            batch_size: 32,
            max_retries: 3,
            retry_backoff_ms: 500,
            concurrency_limit: 4,
        }
    }
}

/// Embeds `(id, text)` items, consulting and filling `cache` when given.
///
/// Uncached texts are sent in batches of `cfg.batch_size`; every vector must
/// have the dimension of the first one seen, cached or fetched.
pub fn embed_corpus<S: AsRef<str> + Sync>(
    items: &[(S, S)],
    family: Family,
    client: &dyn EmbeddingClient,
    cfg: &EmbedConfig,
    cache: Option<&EmbeddingCache>,
) -> Result<Vec<EmbeddingVector>> {
    if items.is_empty() {
        return Err(Error::InvalidInput("no texts to embed".into()));
    }
    if cfg.batch_size == 0 || cfg.concurrency_limit == 0 {
        return Err(Error::InvalidInput("batch_size and concurrency_limit must be positive".into()));
    }
    let model = client.model().to_owned();
    let mut vectors: Vec<Option<Vec<f64>>> = items
        .iter()
        .map(|(_, text)| cache.and_then(|c| c.get(&model, text.as_ref())))
        .collect();

    let missing: Vec<usize> = (0..items.len()).filter(|&i| vectors[i].is_none()).collect();
    let batches: Vec<&[usize]> = missing.chunks(cfg.batch_size).collect();
    let fetched = bounded_map(&batches, cfg.concurrency_limit, |bi, batch| {
        let texts: Vec<String> = batch.iter().map(|&i| items[i].1.as_ref().to_owned()).collect();
        fetch_batch(client, cfg, bi, &texts)
    });
    for (bi, (batch, result)) in batches.iter().zip(fetched).enumerate() {
        let result = result.unwrap_or_else(|| {
            Err(Error::EmbeddingBatch {
                batch: bi,
                message: "not attempted after an earlier batch failed".into(),
            })
        });
        for (&i, v) in batch.iter().zip(result?) {
            if let Some(c) = cache {
                c.put(&model, items[i].1.as_ref(), &v)?;
            }
            vectors[i] = Some(v);
        }
    }

    let dim = vectors[0].as_ref().map(Vec::len).unwrap_or(0);
    items
        .iter()
        .zip(vectors)
        .enumerate()
        .map(|(i, ((id, _), v))| {
            let v = v.expect("every item embedded");
            if v.len() != dim {
                return Err(Error::EmbeddingBatch {
                    batch: missing.iter().position(|&m| m == i).map_or(0, |p| p / cfg.batch_size),
                    message: Error::DimensionMismatch {
                        expected: dim,
                        actual: v.len(),
                    }
                    .to_string(),
                });
            }
            EmbeddingVector::new(v, id.as_ref(), family)
        })
        .collect()
}

fn fetch_batch(client: &dyn EmbeddingClient, cfg: &EmbedConfig, batch: usize, texts: &[String]) -> Result<Vec<Vec<f64>>> {
    let attempts = cfg.max_retries as usize + 1;
    let mut last = None;
    for attempt in 0..attempts {
        if attempt > 0 && cfg.retry_backoff_ms > 0 {
            let factor = 1u64 << (attempt - 1).min(6);
            thread::sleep(Duration::from_millis(cfg.retry_backoff_ms.saturating_mul(factor)));
        }
        match client.embed(texts) {
            Ok(vs) if vs.len() == texts.len() => {
                let dim = vs.first().map_or(0, Vec::len);
                if let Some(bad) = vs.iter().find(|v| v.len() != dim) {
                    return Err(Error::EmbeddingBatch {
                        batch,
                        message: Error::DimensionMismatch {
                            expected: dim,
                            actual: bad.len(),
                        }
                        .to_string(),
                    });
                }
                return Ok(vs);
            }
            Ok(vs) => {
                last = Some(format!("expected {} vectors, got {}", texts.len(), vs.len()));
            }
            Err(e) => {
                log::warn!("embedding batch {batch} attempt {}/{attempts} failed: {e}", attempt + 1);
                last = Some(e.to_string());
            }
        }
    }
    Err(Error::EmbeddingBatch {
        batch,
        message: format!("failed after {attempts} attempts: {}", last.unwrap_or_default()),
    })
}

/// Offline embedder: hashed character trigram counts, L2-normalized.
#[derive(Debug, Clone)]
pub struct NgramHashEmbedder {
    dim: usize,
}

impl NgramHashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0);
        NgramHashEmbedder { dim }
    }
}

impl Default for NgramHashEmbedder {
    fn default() -> Self {
        Self::new(256)
    }
}

fn fnv1a(chars: &[char]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for c in chars {
        for b in (*c as u32).to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

impl EmbeddingClient for NgramHashEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts
            .iter()
            .map(|t| {
                let padded: Vec<char> = format!("  {}  ", t.to_lowercase()).chars().collect();
                let mut v = vec![0.0; self.dim];
                for w in padded.windows(3) {
                    v[(fnv1a(w) % self.dim as u64) as usize] += 1.0;
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= norm);
                v
            })
            .collect())
    }

    fn model(&self) -> &str {
        "mock:ngram"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct LengthClient;

    impl EmbeddingClient for LengthClient {
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
            Ok(texts.iter().map(|t| vec![t.chars().count() as f64, 1.0]).collect())
        }
        fn model(&self) -> &str {
            "len"
        }
    }

    struct DriftClient;

    impl EmbeddingClient for DriftClient {
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
            let dim = if texts[0].starts_with('b') { 3 } else { 2 };
            Ok(texts.iter().map(|_| vec![1.0; dim]).collect())
        }
        fn model(&self) -> &str {
            "drift"
        }
    }

    struct Flaky {
        failures: AtomicUsize,
    }

    impl EmbeddingClient for Flaky {
        fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
            if self.failures.fetch_sub(1, Ordering::SeqCst) > 0 {
                return Err(Error::Provider("503".into()));
            }
            LengthClient.embed(texts)
        }
        fn model(&self) -> &str {
            "flaky"
        }
    }

    fn cfg(batch_size: usize) -> EmbedConfig {
        EmbedConfig {
            batch_size,
            retry_backoff_ms: 0,
            ..EmbedConfig::default()
        }
    }

    #[test]
    fn aligned_vectors() {
        let items = [("a", "abc"), ("b", "hello")];
        let out = embed_corpus(&items, Family::Part, &LengthClient, &cfg(1), None).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].values, [3.0, 1.0]);
        assert_eq!(out[1].values, [5.0, 1.0]);
        assert_eq!(out[1].source_id, "b");
        assert_eq!(out[1].family, Family::Part);
    }

    #[test]
    fn empty_input_rejected() {
        let items: [(&str, &str); 0] = [];
        assert!(embed_corpus(&items, Family::Part, &LengthClient, &cfg(4), None).is_err());
    }

    #[test]
    fn dimension_drift_detected() {
        let items = [("1", "a"), ("2", "b")];
        let err = embed_corpus(&items, Family::Part, &DriftClient, &cfg(1), None).unwrap_err();
        assert!(matches!(err, Error::EmbeddingBatch { batch: 1, .. }), "{err}");
        assert!(err.to_string().contains("dimension mismatch"));
    }

    #[test]
    fn retries_then_succeeds() {
        let client = Flaky { failures: AtomicUsize::new(2) };
        let items = [("1", "ab")];
        let out = embed_corpus(&items, Family::Summary, &client, &cfg(8), None).unwrap();
        assert_eq!(out[0].values, [2.0, 1.0]);

        let client = Flaky { failures: AtomicUsize::new(10) };
        let err = embed_corpus(&items, Family::Summary, &client, &cfg(8), None).unwrap_err();
        assert!(matches!(err, Error::EmbeddingBatch { batch: 0, .. }));
    }

    #[test]
    fn ngram_embedder_is_deterministic() {
        let e = NgramHashEmbedder::new(64);
        let a = e.embed(&["Same text".into(), "same text".into(), "other".into()]).unwrap();
        assert_eq!(a[0], a[1]);
        assert_ne!(a[0], a[2]);
        let norm: f64 = a[2].iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}
