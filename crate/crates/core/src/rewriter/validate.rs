//! Advisory checks on a reordered segment: sub-conclusions should come before
//! the reasoning that supported them, and the original content should still
//! be present.

use serde::Serialize;

use crate::corpus::{segment, Granularity};
use crate::lexmatch::{match_ratio, partial_ratio_alignment};
use crate::text::normalize_for_matching;

use super::TaggedOutput;

pub const DEFAULT_MIN_SIMILARITY: f64 = 0.6;
/// Minimum share of original sentences that must still be found.
pub const MIN_CONTENT_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationFailure {
    /// The sub-conclusion does not occur in the rewritten text.
    SubMissing { sub: usize, score: f64 },
    /// The sub-conclusion still follows the sentence that preceded it originally.
    OrderViolation {
        sub: usize,
        sub_position: usize,
        support_position: usize,
    },
    /// Too few original sentences survive in the rewritten text.
    ContentLoss { match_ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub content_match_ratio: Option<f64>,
    pub failures: Vec<ValidationFailure>,
}

/// Checks a tagged rewrite of `original_segment`.
///
/// Each sub-conclusion is located in the original by its best-matching
/// sentence; the sentence before it in the same paragraph is taken as its
/// supporting content. In the rewritten text the sub-conclusion's match must
/// start before that support's match. Subs with no source sentence scoring at
/// least `min_similarity` are summaries and only get the presence check.
pub fn validate_reorder(original_segment: &str, tagged: &TaggedOutput, min_similarity: f64) -> ValidationReport {
    let rewritten = normalize_for_matching(&tagged.rewritten);
    let mut failures = Vec::new();

    // sentences tagged with the paragraph they belong to
    let mut sentences: Vec<(usize, String)> = Vec::new();
    for (p, step) in segment(original_segment, Granularity::Step).iter().enumerate() {
        for s in segment(&step.text, Granularity::Sentence) {
            sentences.push((p, s.text));
        }
    }

    let content_match_ratio = if sentences.is_empty() {
        None
    } else {
        let segs = segment(original_segment, Granularity::Sentence);
        let ratio = match_ratio(&segs, &rewritten, min_similarity).unwrap_or(0.0);
        if ratio < MIN_CONTENT_RATIO {
            failures.push(ValidationFailure::ContentLoss { match_ratio: ratio });
        }
        Some(ratio)
    };

    for (i, sub) in tagged.subs.iter().enumerate() {
        let sub = normalize_for_matching(sub);
        if sub.is_empty() {
            continue;
        }
        let Ok(in_rewritten) = partial_ratio_alignment(&sub, &rewritten) else {
            continue;
        };
        let score = in_rewritten.score.value();
        if score < min_similarity {
            failures.push(ValidationFailure::SubMissing { sub: i, score });
            continue;
        }
        let source = sentences
            .iter()
            .enumerate()
            .filter_map(|(j, (_, s))| {
                partial_ratio_alignment(&sub, s)
                    .ok()
                    .map(|a| (j, a.score.value()))
            })
            .fold(None::<(usize, f64)>, |best, (j, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((j, v)),
            });
        let Some((j, source_score)) = source else {
            continue;
        };
        if source_score < min_similarity || j == 0 || sentences[j - 1].0 != sentences[j].0 {
            continue;
        }
        let Ok(support) = partial_ratio_alignment(&sentences[j - 1].1, &rewritten) else {
            continue;
        };
        if support.score.value() < min_similarity {
            continue;
        }
        if in_rewritten.hay_start > support.hay_start {
            failures.push(ValidationFailure::OrderViolation {
                sub: i,
                sub_position: in_rewritten.hay_start,
                support_position: support.hay_start,
            });
        }
    }

    ValidationReport {
        ok: failures.is_empty(),
        content_match_ratio,
        failures,
    }
}
