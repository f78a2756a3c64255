//! Embedding-based similarity: cosine, corpus embedding through an external
//! endpoint, and the query-to-candidate retrieval check.

mod cache;
mod embed;

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cache::EmbeddingCache;
pub use embed::{embed_corpus, EmbedConfig, EmbeddingClient, NgramHashEmbedder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Original,
    Part,
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub source_id: String,
    pub family: Family,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, source_id: impl Into<String>, family: Family) -> Result<Self> {
        if values.is_empty() || values.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroVector);
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite embedding value".into()));
        }
        Ok(EmbeddingVector {
            values,
            source_id: source_id.into(),
            family,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Normalized dot product.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalOutcome {
    pub n_queries: usize,
    pub n_candidates: usize,
    /// Per family: share of queries whose top-1 candidate is of that family
    /// and carries the query's id.
    pub family_match_ratio: BTreeMap<Family, f64>,
    /// Per family: mean cosine between each query and its own-id candidate.
    pub avg_cos: BTreeMap<Family, f64>,
    /// Share of queries whose top-1 candidate carries the query's id.
    pub self_match_ratio: f64,
    /// Queries whose top score was shared by more than one candidate.
    pub ties: usize,
}

/// Ranks all candidates (across families) for each query by cosine.
///
/// Equal top scores resolve to the earlier family (part before summary),
/// then the smaller id; such queries are counted in `ties`.
pub fn retrieval_eval(queries: &[EmbeddingVector], candidates: &[EmbeddingVector]) -> Result<RetrievalOutcome> {
    if queries.is_empty() || candidates.is_empty() {
        return Err(Error::InvalidInput("retrieval needs queries and candidates".into()));
    }
    let ids: HashSet<&str> = candidates.iter().map(|c| c.source_id.as_str()).collect();
    if let Some(q) = queries.iter().find(|q| !ids.contains(q.source_id.as_str())) {
        return Err(Error::InvalidInput(format!(
            "query `{}` has no candidate with the same id",
            q.source_id
        )));
    }

    struct PerQuery {
        top: usize,
        tied: bool,
        own: Vec<(Family, f64)>,
    }

    let per_query: Vec<PerQuery> = queries
        .par_iter()
        .map(|q| {
            let mut best: Option<(f64, usize)> = None;
            let mut tied = false;
            let mut own = Vec::new();
            for (ci, c) in candidates.iter().enumerate() {
                let s = cosine(&q.values, &c.values)?;
                if c.source_id == q.source_id {
                    own.push((c.family, s));
                }
                match best {
                    None => best = Some((s, ci)),
                    Some((bs, bi)) => {
                        if s > bs {
                            best = Some((s, ci));
                            tied = false;
                        } else if s == bs {
                            tied = true;
                            let b = &candidates[bi];
                            if (c.family, &c.source_id) < (b.family, &b.source_id) {
                                best = Some((s, ci));
                            }
                        }
                    }
                }
            }
            Ok(PerQuery {
                top: best.expect("candidates nonempty").1,
                tied,
                own,
            })
        })
        .collect::<Result<_>>()?;

    let n = queries.len() as f64;
    let mut family_hits: BTreeMap<Family, usize> = candidates.iter().map(|c| (c.family, 0)).collect();
    let mut cos_sums: BTreeMap<Family, (f64, usize)> = BTreeMap::new();
    let (mut self_hits, mut ties) = (0usize, 0usize);
    for (q, r) in queries.iter().zip(&per_query) {
        let top = &candidates[r.top];
        if top.source_id == q.source_id {
            self_hits += 1;
            *family_hits.get_mut(&top.family).unwrap() += 1;
        }
        ties += r.tied as usize;
        for &(fam, s) in &r.own {
            let e = cos_sums.entry(fam).or_insert((0.0, 0));
            e.0 += s;
            e.1 += 1;
        }
    }
    Ok(RetrievalOutcome {
        n_queries: queries.len(),
        n_candidates: candidates.len(),
        family_match_ratio: family_hits.into_iter().map(|(f, h)| (f, h as f64 / n)).collect(),
        avg_cos: cos_sums.into_iter().map(|(f, (s, k))| (f, s / k as f64)).collect(),
        self_match_ratio: self_hits as f64 / n,
        ties,
    })
}
