//! The `<SUB>` / `<REWRITTEN>` tag protocol of the reorder prompt.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Why a model response could not be read as a tagged rewrite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TagError {
    MissingRewritten,
    DuplicateRewritten,
    UnclosedRewritten,
    UnclosedSub,
    EmptyRewritten,
    /// A tag opened while another tag of the same name was still open.
    Nested(&'static str),
    /// A closing tag without a matching opener.
    StrayClose(&'static str),
}

impl fmt::Display for TagError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TagError::MissingRewritten => f.write_str("missing REWRITTEN block"),
            TagError::DuplicateRewritten => f.write_str("more than one REWRITTEN block"),
            TagError::UnclosedRewritten => f.write_str("unclosed REWRITTEN block"),
            TagError::UnclosedSub => f.write_str("unclosed SUB tag"),
            TagError::EmptyRewritten => f.write_str("empty REWRITTEN block"),
            TagError::Nested(t) => write!(f, "nested {t} tags"),
            TagError::StrayClose(t) => write!(f, "closing {t} tag without opener"),
        }
    }
}

impl std::error::Error for TagError {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedOutput {
    pub subs: Vec<String>,
    pub rewritten: String,
}

impl TaggedOutput {
    /// Serializes back into the tag protocol.
    pub fn to_tagged(&self) -> String {
        let mut out = String::new();
        for s in &self.subs {
            out.push_str("<SUB>");
            out.push_str(s);
            out.push_str("</SUB>\n");
        }
        out.push_str("<REWRITTEN>");
        out.push_str(&self.rewritten);
        out.push_str("</REWRITTEN>");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ParseWarning {
    NoSubConclusions,
    EmptySubDropped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRewrite {
    pub output: TaggedOutput,
    pub warnings: Vec<ParseWarning>,
}

fn tag_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)<(/?)\s*(sub|rewritten)\s*>").unwrap())
}

/// Extracts every `<SUB>` capture in order and the single `<REWRITTEN>` block.
///
/// SUB tags may also appear inside the REWRITTEN block; their text is kept
/// in `rewritten` with the tags removed. Tag names are case-insensitive.
pub fn parse_tagged_output(raw: &str) -> Result<ParsedRewrite> {
    let mut subs = Vec::new();
    let mut warnings = Vec::new();
    let mut sub_open: Option<usize> = None;
    let mut rew_open: Option<usize> = None;
    let mut rewritten: Option<String> = None;
    // rewritten text accumulated piecewise so inner SUB tags can be dropped
    let mut rew_buf = String::new();
    let mut last = 0;

    for caps in tag_regex().captures_iter(raw) {
        let m = caps.get(0).unwrap();
        let closing = !caps[1].is_empty();
        let is_sub = caps[2].eq_ignore_ascii_case("sub");
        if rew_open.is_some() {
            rew_buf.push_str(&raw[last..m.start()]);
        }
        last = m.end();
        match (is_sub, closing) {
            (true, false) => {
                if sub_open.is_some() {
                    return Err(TagError::Nested("SUB").into());
                }
                sub_open = Some(m.end());
            }
            (true, true) => {
                let start = sub_open.take().ok_or(TagError::StrayClose("SUB"))?;
                let text = raw[start..m.start()].trim();
                if text.is_empty() {
                    warnings.push(ParseWarning::EmptySubDropped);
                } else {
                    subs.push(text.to_owned());
                }
            }
            (false, false) => {
                if rew_open.is_some() {
                    return Err(TagError::Nested("REWRITTEN").into());
                }
                if rewritten.is_some() {
                    return Err(TagError::DuplicateRewritten.into());
                }
                rew_open = Some(m.end());
            }
            (false, true) => {
                rew_open.take().ok_or(TagError::StrayClose("REWRITTEN"))?;
                if sub_open.is_some() {
                    return Err(TagError::UnclosedSub.into());
                }
                rewritten = Some(std::mem::take(&mut rew_buf));
            }
        }
    }
    if rew_open.is_some() {
        return Err(TagError::UnclosedRewritten.into());
    }
    if sub_open.is_some() {
        return Err(TagError::UnclosedSub.into());
    }
    let rewritten = rewritten.ok_or(TagError::MissingRewritten)?.trim().to_owned();
    if rewritten.is_empty() {
        return Err(TagError::EmptyRewritten.into());
    }
    if subs.is_empty() {
        warnings.push(ParseWarning::NoSubConclusions);
    }
    Ok(ParsedRewrite {
        output: TaggedOutput { subs, rewritten },
        warnings,
    })
}

/// Plain-text model output: the REWRITTEN block when one is present,
/// otherwise the trimmed response.
pub(crate) fn plain_output(raw: &str) -> Result<String> {
    if tag_regex().is_match(raw) {
        return parse_tagged_output(raw).map(|p| p.output.rewritten);
    }
    let t = raw.trim();
    if t.is_empty() {
        return Err(TagError::EmptyRewritten.into());
    }
    Ok(t.to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;

    fn tag_err(raw: &str) -> TagError {
        match parse_tagged_output(raw) {
            Err(Error::MalformedRewrite(e)) => e,
            other => panic!("expected tag error, got {other:?}"),
        }
    }

    #[test]
    fn direct_parse() {
        let p = parse_tagged_output("<SUB>A</SUB><REWRITTEN>A. because \u{2026}</REWRITTEN>").unwrap();
        assert_eq!(p.output.subs, ["A"]);
        assert_eq!(p.output.rewritten, "A. because \u{2026}");
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn malformed_classes() {
        assert_eq!(
            tag_err("<REWRITTEN>a</REWRITTEN><REWRITTEN>b</REWRITTEN>"),
            TagError::DuplicateRewritten
        );
        assert_eq!(tag_err("<SUB>a</SUB> no block"), TagError::MissingRewritten);
        assert_eq!(tag_err("<SUB>a</SUB><REWRITTEN>text"), TagError::UnclosedRewritten);
        assert_eq!(tag_err("<SUB>a <REWRITTEN>t</REWRITTEN>"), TagError::UnclosedSub);
        assert_eq!(tag_err("<SUB>a<SUB>b</SUB></SUB><REWRITTEN>t</REWRITTEN>"), TagError::Nested("SUB"));
        assert_eq!(
            tag_err("<REWRITTEN>a<REWRITTEN>b</REWRITTEN></REWRITTEN>"),
            TagError::Nested("REWRITTEN")
        );
        assert_eq!(tag_err("</SUB><REWRITTEN>t</REWRITTEN>"), TagError::StrayClose("SUB"));
        assert_eq!(tag_err("<REWRITTEN>  </REWRITTEN>"), TagError::EmptyRewritten);
        let msg = parse_tagged_output("nothing").unwrap_err().to_string();
        assert!(msg.starts_with("malformed rewrite"), "{msg}");
    }

    #[test]
    fn vacuous_reorder_warns() {
        let p = parse_tagged_output("<REWRITTEN> text </REWRITTEN>").unwrap();
        assert!(p.output.subs.is_empty());
        assert_eq!(p.output.rewritten, "text");
        assert_eq!(p.warnings, [ParseWarning::NoSubConclusions]);
    }

    #[test]
    fn tolerant_forms() {
        let raw = "Here you go:\n<sub> X holds </sub>\n<SUB></SUB>\n<Rewritten>\n<SUB>X holds</SUB> because Y.\n</Rewritten>\nDone.";
        let p = parse_tagged_output(raw).unwrap();
        assert_eq!(p.output.subs, ["X holds", "X holds"]);
        assert_eq!(p.output.rewritten, "X holds because Y.");
        assert_eq!(p.warnings, [ParseWarning::EmptySubDropped]);
    }

    #[test]
    fn plain_output_unwraps() {
        assert_eq!(plain_output("  hi \n").unwrap(), "hi");
        assert_eq!(plain_output("<REWRITTEN>x</REWRITTEN>").unwrap(), "x");
        assert!(plain_output("   ").is_err());
    }

    fn tag_free() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9 .,<>/=]{1,30}"
            .prop_filter("no tags", |s| !tag_regex().is_match(s))
            .prop_map(|s| s.trim().to_owned())
            .prop_filter("nonempty", |s| !s.is_empty())
    }

    proptest! {
        #[test]
        fn serialization_round_trip(subs in proptest::collection::vec(tag_free(), 0..5), rewritten in tag_free()) {
            let t = TaggedOutput { subs, rewritten };
            let parsed = parse_tagged_output(&t.to_tagged()).unwrap();
            prop_assert_eq!(parsed.output, t);
        }
    }
}
