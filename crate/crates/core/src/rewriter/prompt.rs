use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PLACEHOLDER: &str = "{{TEXT}}";

pub const REMOVAL_PROMPT: &str = "\
Rewrite the given text, which is a part of a complete reasoning process. Convert only the parts expressed in a self-talk style into a declarative format. Avoid using first-person expressions such as 'I', 'me', 'we', or 'let's'. Do not alter any parts that are not self-talk; keep them exactly as in the original text.

Do not add any extra information. Do not include any introductory phrases.

Text:

{{TEXT}}";

pub const REORDER_PROMPT: &str = "\
You will process the given text in two steps. The given text is a part of a complete reasoning process.

Step 1: Extract and list the most important sub-conclusions in the given reasoning process. Keep the number of sub-conclusions small and focused.

Wrap the sub-conclusions in the tags <SUB> and </SUB> for easy extraction.

Step 2: Move the sentences corresponding to these sub-conclusions to appear *before* their respective reasoning processes. Keep the sub-conclusions unnumbered and naturally integrated into the context. Do not modify any other parts of the original text.

Wrap the entire transformed text in the tags <REWRITTEN> and </REWRITTEN> for easy extraction.

Text:

{{TEXT}}";

pub const SUMMARY_PROMPT: &str = "\
Summarize the following reasoning segment in 1\u{2013}2 sentences.

Text:

{{TEXT}}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Removal,
    Reorder,
    Summary,
}

/// A prompt body with exactly one `{{TEXT}}` placeholder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTemplate")]
pub struct PromptTemplate {
    kind: PromptKind,
    body: String,
}

#[derive(Deserialize)]
struct RawTemplate {
    kind: PromptKind,
    body: String,
}

impl TryFrom<RawTemplate> for PromptTemplate {
    type Error = Error;

    fn try_from(raw: RawTemplate) -> Result<Self> {
        PromptTemplate::new(raw.kind, raw.body)
    }
}

impl PromptTemplate {
    pub fn new(kind: PromptKind, body: impl Into<String>) -> Result<Self> {
        let body = body.into();
        let count = body.matches(PLACEHOLDER).count();
        if count != 1 {
            return Err(Error::InvalidInput(format!(
                "{kind:?} template must contain exactly one {PLACEHOLDER} placeholder, found {count}"
            )));
        }
        Ok(PromptTemplate { kind, body })
    }

    pub fn removal() -> Self {
        Self::builtin(PromptKind::Removal, REMOVAL_PROMPT)
    }

    pub fn reorder() -> Self {
        Self::builtin(PromptKind::Reorder, REORDER_PROMPT)
    }

    pub fn summary() -> Self {
        Self::builtin(PromptKind::Summary, SUMMARY_PROMPT)
    }

    fn builtin(kind: PromptKind, body: &str) -> Self {
        PromptTemplate {
            kind,
            body: body.to_owned(),
        }
    }

    pub fn kind(&self) -> PromptKind {
        self.kind
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// Substitutes the segment text for the placeholder.
    pub fn render(&self, segment_text: &str) -> String {
        self.body.replacen(PLACEHOLDER, segment_text, 1)
    }
}

/// The three templates used by the pipelines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptSet {
    pub removal: PromptTemplate,
    pub reorder: PromptTemplate,
    pub summary: PromptTemplate,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            removal: PromptTemplate::removal(),
            reorder: PromptTemplate::reorder(),
            summary: PromptTemplate::summary(),
        }
    }
}
