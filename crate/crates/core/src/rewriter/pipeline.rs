//! Segment, rewrite, and reassemble whole traces.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{step_spans, Method, TraceRecord};
use crate::error::{Error, Result};
use crate::parallel::bounded_map;

use super::tags::{parse_tagged_output, plain_output, ParseWarning};
use super::validate::{validate_reorder, ValidationReport, DEFAULT_MIN_SIMILARITY};
use super::{GenerationClient, GenerationRequest, PromptKind, PromptSet, PromptTemplate};

/// Separator placed between rewritten chunks.
pub const CHUNK_SEPARATOR: &str = "\n\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewriteConfig {
    /// Maximum characters per chunk sent to the endpoint.
    pub segment_budget: usize,
    /// Extra attempts per call after the first one fails.
    pub max_retries: u32,
    /// Maximum requests in flight.
    pub concurrency_limit: usize,
    /// Base delay before a retry, doubled on each further attempt.
    pub retry_backoff_ms: u64,
    /// Similarity floor for the advisory reorder validation.
    pub min_similarity: f64,
    pub prompts: PromptSet,
}

impl Default for RewriteConfig {
    fn default() -> Self {
        RewriteConfig {
            segment_budget: 2500,
            max_retries: 3,
            concurrency_limit: 4,
            retry_backoff_ms: 500,
            min_similarity: DEFAULT_MIN_SIMILARITY,
            prompts: PromptSet::default(),
        }
    }
}

impl RewriteConfig {
    /// Per-chunk call order of the reformulation pipeline.
    pub const STEP_ORDER: [PromptKind; 2] = [PromptKind::Removal, PromptKind::Reorder];

    pub fn validate(&self) -> Result<()> {
        if self.segment_budget == 0 {
            return Err(Error::InvalidInput("segment_budget must be positive".into()));
        }
        if self.concurrency_limit == 0 {
            return Err(Error::InvalidInput("concurrency_limit must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.min_similarity) {
            return Err(Error::InvalidInput("min_similarity outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// A contiguous slice `[start, end)` (character offsets) of the source trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chunk {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

/// Greedily packs whole steps into chunks of at most `budget` characters.
///
/// A step longer than the budget is broken at sentence boundaries, and a
/// sentence longer than the budget at its last whitespace that fits (or
/// mid-word when there is none). Chunks are trimmed; the text between
/// consecutive chunks is whitespace only.
pub fn chunk_trace(trace: &str, budget: usize) -> Vec<Chunk> {
    assert!(budget > 0, "chunk budget must be positive");
    let chars: Vec<char> = trace.chars().collect();
    let mut pieces = Vec::new();
    for (s, e) in step_spans(&chars) {
        if e - s <= budget {
            pieces.push((s, e));
            continue;
        }
        let step: String = chars[s..e].iter().collect();
        for seg in crate::corpus::segment(&step, crate::corpus::Granularity::Sentence) {
            let (ss, se) = (s + seg.start, s + seg.end);
            if se - ss <= budget {
                pieces.push((ss, se));
            } else {
                hard_split(&chars, ss, se, budget, &mut pieces);
            }
        }
    }

    let mut chunks: Vec<Chunk> = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    for (s, e) in pieces {
        current = match current {
            Some((cs, _)) if e - cs <= budget => Some((cs, e)),
            Some(done) => {
                push_chunk(&mut chunks, &chars, done);
                Some((s, e))
            }
            None => Some((s, e)),
        };
    }
    if let Some(done) = current {
        push_chunk(&mut chunks, &chars, done);
    }
    chunks
}

fn push_chunk(chunks: &mut Vec<Chunk>, chars: &[char], (start, end): (usize, usize)) {
    chunks.push(Chunk {
        index: chunks.len(),
        start,
        end,
        text: chars[start..end].iter().collect(),
    });
}

fn hard_split(chars: &[char], mut start: usize, end: usize, budget: usize, out: &mut Vec<(usize, usize)>) {
    while end - start > budget {
        let limit = start + budget;
        // last whitespace such that the left part fits
        let cut = (start + 1..=limit)
            .rev()
            .find(|&i| chars[i].is_whitespace())
            .unwrap_or(limit);
        let mut left_end = cut;
        while left_end > start && chars[left_end - 1].is_whitespace() {
            left_end -= 1;
        }
        if left_end > start {
            out.push((start, left_end));
        }
        start = cut;
        while start < end && chars[start].is_whitespace() {
            start += 1;
        }
    }
    if start < end {
        out.push((start, end));
    }
}

/// Per-chunk diagnostics of a reformulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChunkReport {
    pub index: usize,
    pub input_chars: usize,
    pub subs: Vec<String>,
    pub warnings: Vec<ParseWarning>,
    pub validation: Option<ValidationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewriteOutcome {
    pub record: TraceRecord,
    pub chunks: Vec<ChunkReport>,
}

/// Removes self-talk and reorders sub-conclusions, chunk by chunk.
pub fn reformulate_trace(
    record: &TraceRecord,
    cfg: &RewriteConfig,
    client: &dyn GenerationClient,
) -> Result<TraceRecord> {
    reformulate_trace_detailed(record, cfg, client).map(|o| o.record)
}

pub fn reformulate_trace_detailed(
    record: &TraceRecord,
    cfg: &RewriteConfig,
    client: &dyn GenerationClient,
) -> Result<RewriteOutcome> {
    run_pipeline(record, cfg, Method::Part, |chunk| {
        let removed = call_with_retries(client, cfg, &cfg.prompts.removal, chunk, &chunk.text, plain_output)?;
        let parsed = call_with_retries(client, cfg, &cfg.prompts.reorder, chunk, &removed, parse_tagged_output)?;
        let validation = validate_reorder(&removed, &parsed.output, cfg.min_similarity);
        Ok((
            parsed.output.rewritten.clone(),
            ChunkReport {
                index: chunk.index,
                input_chars: chunk.end - chunk.start,
                subs: parsed.output.subs,
                warnings: parsed.warnings,
                validation: Some(validation),
            },
        ))
    })
}

/// Segment-level summary baseline: one summary call per chunk.
pub fn summarize_trace(
    record: &TraceRecord,
    cfg: &RewriteConfig,
    client: &dyn GenerationClient,
) -> Result<TraceRecord> {
    summarize_trace_detailed(record, cfg, client).map(|o| o.record)
}

pub fn summarize_trace_detailed(
    record: &TraceRecord,
    cfg: &RewriteConfig,
    client: &dyn GenerationClient,
) -> Result<RewriteOutcome> {
    run_pipeline(record, cfg, Method::Summary, |chunk| {
        let summary = call_with_retries(client, cfg, &cfg.prompts.summary, chunk, &chunk.text, plain_output)?;
        Ok((
            summary,
            ChunkReport {
                index: chunk.index,
                input_chars: chunk.end - chunk.start,
                subs: Vec::new(),
                warnings: Vec::new(),
                validation: None,
            },
        ))
    })
}

fn run_pipeline<F>(
    record: &TraceRecord,
    cfg: &RewriteConfig,
    method: Method,
    per_chunk: F,
) -> Result<RewriteOutcome>
where
    F: Fn(&Chunk) -> Result<(String, ChunkReport)> + Sync,
{
    cfg.validate()?;
    if record.reasoning.trim().is_empty() {
        return Err(Error::InvalidRecord {
            id: record.id.clone(),
            reason: "reasoning is empty".into(),
        });
    }
    let chunks = chunk_trace(&record.reasoning, cfg.segment_budget);
    let results = run_bounded(&chunks, cfg.concurrency_limit, &per_chunk);

    let mut texts = Vec::with_capacity(chunks.len());
    let mut reports = Vec::with_capacity(chunks.len());
    for r in results {
        let (text, report) = r?;
        texts.push(text);
        reports.push(report);
    }
    let mut out = record.clone();
    out.reformulated = Some(texts.join(CHUNK_SEPARATOR));
    out.method = Some(method);
    Ok(RewriteOutcome {
        record: out,
        chunks: reports,
    })
}

/// Runs `job` over all chunks with at most `limit` workers, collecting results
/// by chunk index.
fn run_bounded<T, F>(chunks: &[Chunk], limit: usize, job: &F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(&Chunk) -> Result<T> + Sync,
{
    bounded_map(chunks, limit, |_, c| job(c))
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.unwrap_or_else(|| {
                Err(Error::Chunk {
                    chunk: i,
                    message: "not attempted after an earlier chunk failed".into(),
                })
            })
        })
        .collect()
}

fn call_with_retries<T>(
    client: &dyn GenerationClient,
    cfg: &RewriteConfig,
    template: &PromptTemplate,
    chunk: &Chunk,
    text: &str,
    parse: impl Fn(&str) -> Result<T>,
) -> Result<T> {
    let request = GenerationRequest {
        task: template.kind(),
        prompt: template.render(text),
        text: text.to_owned(),
        max_output_chars: 2 * text.chars().count(),
    };
    let attempts = cfg.max_retries as usize + 1;
    let mut last_err = None;
    for attempt in 0..attempts {
        if attempt > 0 && cfg.retry_backoff_ms > 0 {
            let factor = 1u64 << (attempt - 1).min(6);
            thread::sleep(Duration::from_millis(cfg.retry_backoff_ms.saturating_mul(factor)));
        }
        match client.generate(&request).and_then(|raw| parse(&raw)) {
            Ok(v) => return Ok(v),
            Err(e) => {
                log::warn!(
                    "chunk {} {:?} attempt {}/{} failed: {e}",
                    chunk.index,
                    template.kind(),
                    attempt + 1,
                    attempts
                );
                last_err = Some(e);
            }
        }
    }
    Err(Error::Chunk {
        chunk: chunk.index,
        message: format!(
            "{:?} step failed after {attempts} attempts: {}",
            template.kind(),
            last_err.expect("at least one attempt")
        ),
    })
}
