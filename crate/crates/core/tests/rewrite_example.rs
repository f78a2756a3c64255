//! The published three-paragraph reformulation example, replayed through the
//! pipeline with a client that returns the published rewrite.

use tracereform::corpus::{Method, TraceRecord};
use tracereform::rewriter::{
    parse_tagged_output, reformulate_trace_detailed, validate_reorder, GenerationClient, GenerationRequest,
    PromptKind, RewriteConfig, TaggedOutput,
};

const ORIGINAL: &str = "Okay, let's see. I need to solve this problem where three people (Chef, head server, sous-chef) have transceivers that can communicate directly if within R meters. If not, but there's a third person acting as a bridge, then they can still communicate. The goal is to check if all three can communicate with each other, possibly through the third.

Hmm. So for each test case, given R and three points, determine if the three form a connected graph where each pair is either directly connected (distance ≤ R) or connected via the third.

Wait, but how exactly? Let's think. The communication can go through one intermediary. So all three must be in a chain where each consecutive pair is within R, or perhaps any two are connected via a path through the third.";

const REFORMULATED: &str = "The goal is to check if all three can communicate with each other, possibly through the third. The problem involves three people (Chef, head server, sous-chef) who have transceivers that can communicate directly if within R meters. If not, but there's a third person acting as a bridge, then they can still communicate.

For each test case, given R and three points, it is necessary to determine if the three form a connected graph where each pair is either directly connected (distance ≤ R) or connected via the third.

The condition is that all three can communicate with each other, possibly through one another. The communication can go through one intermediary. Therefore, all three must be in a chain where each consecutive pair is within R, or any two are connected via a path through the third.";

const SUB: &str = "The goal is to check if all three can communicate with each other, possibly through the third.";

fn tagged() -> TaggedOutput {
    TaggedOutput {
        subs: vec![SUB.to_owned()],
        rewritten: REFORMULATED.to_owned(),
    }
}

#[test]
fn published_example_passes_reorder_validation() {
    let report = validate_reorder(ORIGINAL, &tagged(), 0.6);
    assert!(report.ok, "{report:?}");
    assert!(report.content_match_ratio.unwrap() >= 0.5);
}

#[test]
fn unreordered_rewrite_is_flagged() {
    // the sub-conclusion left after its supporting sentence
    let report = validate_reorder(
        ORIGINAL,
        &TaggedOutput {
            subs: vec![SUB.to_owned()],
            rewritten: ORIGINAL.to_owned(),
        },
        0.6,
    );
    assert!(!report.ok);
}

struct Published;

impl GenerationClient for Published {
    fn generate(&self, request: &GenerationRequest) -> tracereform::Result<String> {
        Ok(match request.task {
            PromptKind::Removal => request.text.clone(),
            PromptKind::Reorder => format!("Sub-conclusions:\n{}\n\n", tagged().to_tagged()),
            PromptKind::Summary => unreachable!(),
        })
    }

    fn name(&self) -> &str {
        "published"
    }
}

#[test]
fn pipeline_with_published_rewrite() {
    let record = TraceRecord::new("chef", "Can all three communicate?", ORIGINAL, "yes");
    let cfg = RewriteConfig {
        retry_backoff_ms: 0,
        ..RewriteConfig::default()
    };
    let out = reformulate_trace_detailed(&record, &cfg, &Published).unwrap();
    assert_eq!(out.record.reformulated.as_deref(), Some(REFORMULATED));
    assert_eq!(out.record.method, Some(Method::Part));
    assert_eq!(out.record.answer, "yes");
    assert_eq!(out.chunks.len(), 1);
    assert_eq!(out.chunks[0].subs, vec![SUB.to_owned()]);
    assert!(out.chunks[0].validation.as_ref().unwrap().ok);
    assert_eq!(parse_tagged_output(&tagged().to_tagged()).unwrap().output, tagged());
}
