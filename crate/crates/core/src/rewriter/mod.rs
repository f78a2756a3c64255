//! Two-step prompted reformulation of reasoning traces: self-talk removal
//! followed by sub-conclusion reordering, with a summary baseline.

mod client;
mod pipeline;
mod prompt;
mod tags;
mod validate;

pub use client::{EchoClient, GenerationClient, GenerationRequest};
pub use pipeline::{
    chunk_trace, reformulate_trace, reformulate_trace_detailed, summarize_trace,
    summarize_trace_detailed, Chunk, ChunkReport, RewriteConfig, RewriteOutcome, CHUNK_SEPARATOR,
};
pub use prompt::{
    PromptKind, PromptSet, PromptTemplate, PLACEHOLDER, REMOVAL_PROMPT, REORDER_PROMPT,
    SUMMARY_PROMPT,
};
pub use tags::{parse_tagged_output, ParseWarning, ParsedRewrite, TagError, TaggedOutput};
pub use validate::{
    validate_reorder, ValidationFailure, ValidationReport, DEFAULT_MIN_SIMILARITY,
    MIN_CONTENT_RATIO,
};
