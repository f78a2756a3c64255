//! Reformulation of LLM reasoning traces and the evaluation tooling around it:
//! corpus I/O and segmentation, token-gradient analysis, self-talk detection,
//! the prompted two-step rewriter, lexical fuzzy matching, and embedding-based
//! retrieval checks.

pub mod corpus;
pub mod error;
pub mod lexmatch;
mod parallel;
pub mod providers;
pub mod rewriter;
pub mod selftalk;
pub mod semantic;
pub mod text;
pub mod tokenprob;

pub use error::{Error, Result};
