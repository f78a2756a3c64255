//! Self-talk detection: lexicon matching, keyword term frequency, a
//! rule-based interjection remover, and the term-frequency detector metrics.

mod detect;

use std::collections::BTreeSet;
use std::fs;
use std::ops::Range;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use detect::{
    classifier_metrics, classify_by_threshold, confusion_at, Confusion, DetectReport, Label,
    RocPoint, ScoredExample, TraceClass,
};

const DEFAULT_KEYWORDS: &[&str] = &[
    "hmm", "wait", "okay", "ok", "oh", "alright", "let's", "lets", "i", "i'm", "i'll", "i've",
    "me", "my", "we", "we're", "let", "us",
];

/// Interjections the baseline remover is allowed to delete.
const INTERJECTIONS: &[&str] = &["hmm", "wait", "okay", "oh", "alright"];

/// Lowercase keyword set used to spot first-person and colloquial tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelfTalkLexicon {
    keywords: BTreeSet<String>,
}

impl Default for SelfTalkLexicon {
    fn default() -> Self {
        SelfTalkLexicon {
            keywords: DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SelfTalkLexicon {
    pub fn new<I, S>(keywords: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let keywords: BTreeSet<String> = keywords.into_iter().map(Into::into).collect();
        if keywords.is_empty() {
            return Err(Error::InvalidInput("lexicon is empty".into()));
        }
        for k in &keywords {
            if k.is_empty() || k.chars().any(char::is_whitespace) {
                return Err(Error::InvalidInput(format!("bad lexicon entry {k:?}")));
            }
            if k.to_lowercase() != *k {
                return Err(Error::InvalidInput(format!("lexicon entry {k:?} is not lowercase")));
            }
        }
        Ok(SelfTalkLexicon { keywords })
    }

    /// One keyword per line; `#` starts a comment. Entries are lowercased.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty())
                .map(|l| normalize_word(l)),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.keywords.contains(&normalize_word(word))
    }

    /// Whether a model token (possibly carrying spaces, punctuation or
    /// tokenizer space markers) is a lexicon word.
    pub fn matches_token(&self, token: &str) -> bool {
        let stripped = token.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'' && c != '\u{2019}');
        let stripped = stripped.trim_matches(|c: char| c == '\'' || c == '\u{2019}');
        !stripped.is_empty() && self.contains(stripped)
    }

    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.keywords.iter().map(String::as_str)
    }
}

fn normalize_word(w: &str) -> String {
    w.to_lowercase().replace('\u{2019}', "'")
}

fn word_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[\p{L}\p{N}_]+(?:['\u{2019}][\p{L}\p{N}_]+)*").unwrap())
}

/// Byte ranges of whole-word, case-insensitive lexicon hits, in text order.
pub fn find_selftalk(text: &str, lexicon: &SelfTalkLexicon) -> Vec<Range<usize>> {
    word_regex()
        .find_iter(text)
        .filter(|m| lexicon.contains(m.as_str()))
        .map(|m| m.range())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermFrequencyReport {
    pub hit_count: usize,
    pub word_count: usize,
    pub frequency: f64,
}

/// Share of whitespace-delimited words (edge punctuation stripped) that are
/// lexicon keywords. Empty text has frequency 0.
pub fn term_frequency(text: &str, lexicon: &SelfTalkLexicon) -> TermFrequencyReport {
    let mut word_count = 0;
    let mut hit_count = 0;
    for raw in text.split_whitespace() {
        let word = raw.trim_matches(|c: char| !c.is_alphanumeric());
        if word.is_empty() {
            continue;
        }
        word_count += 1;
        if lexicon.contains(word) {
            hit_count += 1;
        }
    }
    let frequency = if word_count == 0 {
        0.0
    } else {
        hit_count as f64 / word_count as f64
    };
    TermFrequencyReport {
        hit_count,
        word_count,
        frequency,
    }
}

fn interjection_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(hmm|wait|okay|oh|alright)([,.!?\u{2026}]+)[ \t]*").unwrap()
    })
}

fn at_sentence_start(before: &str) -> bool {
    let t = before.trim_end_matches([' ', '\t']);
    if t.is_empty() || t.ends_with('\n') {
        return true;
    }
    let t = t.trim_end_matches(['"', '\'', '\u{201d}', '\u{2019}', ')']);
    t.ends_with(['.', '!', '?', '\u{2026}'])
}

/// Deletes standalone interjections (`Hmm,` / `Wait.` / `, okay,`) together
/// with their punctuation and re-capitalizes the sentence start. Only words
/// that are both interjections and lexicon entries are touched.
pub fn strip_selftalk_baseline(text: &str, lexicon: &SelfTalkLexicon) -> String {
    let mut current = text.to_owned();
    // each pass removes at least one token, so this terminates
    loop {
        let next = strip_pass(&current, lexicon);
        if next == current {
            return next;
        }
        current = next;
    }
}

fn strip_pass(text: &str, lexicon: &SelfTalkLexicon) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    let mut capitalize_next = false;
    for caps in interjection_regex().captures_iter(text) {
        let whole = caps.get(0).unwrap();
        let word = caps.get(1).unwrap().as_str();
        let punct = caps.get(2).unwrap().as_str();
        let word_lc = word.to_lowercase();
        if !INTERJECTIONS.contains(&word_lc.as_str()) || !lexicon.contains(&word_lc) {
            continue;
        }
        let before = &text[..whole.start()];
        let sentence_start = at_sentence_start(before);
        let parenthetical = punct == ","
            && before.trim_end_matches([' ', '\t']).ends_with(',');
        if !(sentence_start || parenthetical) {
            continue;
        }
        push_with_capital(&mut out, &text[last..whole.start()], &mut capitalize_next);
        last = whole.end();
        if sentence_start {
            capitalize_next = true;
        }
        if last == text.len() {
            let trimmed = out.trim_end_matches([' ', '\t']).len();
            out.truncate(trimmed);
        }
    }
    if last == 0 {
        return text.to_owned();
    }
    push_with_capital(&mut out, &text[last..], &mut capitalize_next);
    out
}

fn push_with_capital(out: &mut String, rest: &str, capitalize: &mut bool) {
    if !*capitalize || rest.is_empty() {
        out.push_str(rest);
        return;
    }
    *capitalize = false;
    let mut chars = rest.chars();
    let first = chars.next().unwrap();
    out.extend(first.to_uppercase());
    out.push_str(chars.as_str());
}
