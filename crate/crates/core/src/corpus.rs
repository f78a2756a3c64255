//! Trace corpora: the line-delimited record format and trace segmentation.
//!
//! A corpus file holds one JSON object per line with the keys `id`, `query`,
//! `reasoning`, `answer` and the optional `reformulated` / `method`. Blank
//! lines are ignored.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::collapse_whitespace;

/// How the `reformulated` field of a record was produced.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Method {
    Part,
    Summary,
    Other(String),
}

impl Method {
    pub fn as_str(&self) -> &str {
        match self {
            Method::Part => "part",
            Method::Summary => "summary",
            Method::Other(label) => label,
        }
    }
}

impl From<String> for Method {
    fn from(s: String) -> Self {
        match s.as_str() {
            "part" => Method::Part,
            "summary" => Method::Summary,
            _ => Method::Other(s),
        }
    }
}

impl From<Method> for String {
    fn from(m: Method) -> Self {
        m.as_str().to_owned()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One (query, reasoning, answer) triple, optionally carrying a rewritten trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: String,
    pub query: String,
    pub reasoning: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reformulated: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
}

impl TraceRecord {
    pub fn new(
        id: impl Into<String>,
        query: impl Into<String>,
        reasoning: impl Into<String>,
        answer: impl Into<String>,
    ) -> Self {
        TraceRecord {
            id: id.into(),
            query: query.into(),
            reasoning: reasoning.into(),
            answer: answer.into(),
            reformulated: None,
            method: None,
        }
    }
}

/// An ordered collection of records with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<TraceRecord>,
}

impl Corpus {
    pub fn new(records: Vec<TraceRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            check_record(r)?;
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Corpus { records })
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TraceRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TraceRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TraceRecord> {
        self.records.iter()
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a TraceRecord;
    type IntoIter = std::slice::Iter<'a, TraceRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

fn check_record(r: &TraceRecord) -> Result<()> {
    if r.id.is_empty() {
        return Err(Error::InvalidRecord {
            id: r.id.clone(),
            reason: "empty id".into(),
        });
    }
    Ok(())
}

/// Reads a corpus, one record per nonempty line, preserving file order.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses corpus records from any buffered reader.
pub fn read_corpus(reader: impl BufRead) -> Result<Corpus> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: strip_serde_position(&e),
        })?;
        check_record(&record).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        records.push(record);
    }
    Ok(Corpus { records })
}

// serde_json appends "at line 1 column N", which is meaningless for a single line.
fn strip_serde_position(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    match msg.rfind(" at line ") {
        Some(pos) => msg[..pos].to_owned(),
        None => msg,
    }
}

/// Writes a corpus in the line-delimited format.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_corpus(corpus, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_corpus(corpus: &Corpus, w: &mut impl Write) -> std::io::Result<()> {
    for r in corpus.iter() {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Sentence,
    Step,
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sentence" => Ok(Granularity::Sentence),
            "step" => Ok(Granularity::Step),
            other => Err(Error::InvalidInput(format!(
                "unknown granularity `{other}` (expected sentence or step)"
            ))),
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Sentence => "sentence",
            Granularity::Step => "step",
        })
    }
}

/// A slice of a trace. `start`/`end` are character offsets into the source;
/// `text` is that slice with whitespace collapsed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub granularity: Granularity,
}

/// Splits a trace into steps (blank-line separated paragraphs) or sentences.
///
/// Sentences never cross a step boundary. A sentence ends at `.`, `?` or `!`
/// (plus any closing quotes) when followed by whitespace and an uppercase
/// letter, or by the end of the step. No split happens inside an open
/// parenthesis or an unterminated `$...$` math span.
pub fn segment(trace: &str, granularity: Granularity) -> Vec<Segment> {
    let chars: Vec<char> = trace.chars().collect();
    let mut out = Vec::new();
    for (s, e) in step_spans(&chars) {
        match granularity {
            Granularity::Step => push_segment(&mut out, &chars, s, e, granularity),
            Granularity::Sentence => {
                for (ss, se) in sentence_spans(&chars, s, e) {
                    push_segment(&mut out, &chars, ss, se, granularity);
                }
            }
        }
    }
    out
}

fn push_segment(out: &mut Vec<Segment>, chars: &[char], start: usize, end: usize, g: Granularity) {
    let Some((start, end)) = trim_span(chars, start, end) else {
        return;
    };
    let raw: String = chars[start..end].iter().collect();
    out.push(Segment {
        text: collapse_whitespace(&raw),
        start,
        end,
        granularity: g,
    });
}

fn trim_span(chars: &[char], mut start: usize, mut end: usize) -> Option<(usize, usize)> {
    while start < end && chars[start].is_whitespace() {
        start += 1;
    }
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    (start < end).then_some((start, end))
}

/// Character spans of blank-line separated paragraphs, trimmed.
pub(crate) fn step_spans(chars: &[char]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut para_start: Option<usize> = None;
    let mut para_end = 0;
    let mut line_start = 0;
    for i in 0..=chars.len() {
        if i < chars.len() && chars[i] != '\n' {
            continue;
        }
        let blank = chars[line_start..i].iter().all(|c| c.is_whitespace());
        if blank {
            if let Some(s) = para_start.take() {
                spans.extend(trim_span(chars, s, para_end));
            }
        } else {
            para_start.get_or_insert(line_start);
            para_end = i;
        }
        line_start = i + 1;
    }
    if let Some(s) = para_start {
        spans.extend(trim_span(chars, s, para_end));
    }
    spans
}

const CLOSERS: &[char] = &['"', '\'', '\u{201d}', '\u{2019}'];

fn sentence_spans(chars: &[char], start: usize, end: usize) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut seg_start = start;
    let mut depth = 0usize;
    let mut in_math = false;
    let mut i = start;
    while i < end {
        match chars[i] {
            '$' => in_math = !in_math,
            '(' if !in_math => depth += 1,
            ')' if !in_math => depth = depth.saturating_sub(1),
            '.' | '?' | '!' if depth == 0 && !in_math => {
                let mut j = i + 1;
                while j < end && CLOSERS.contains(&chars[j]) {
                    j += 1;
                }
                let mut k = j;
                while k < end && chars[k].is_whitespace() {
                    k += 1;
                }
                let boundary = k == end || (k > j && chars[k].is_uppercase());
                if boundary {
                    spans.push((seg_start, j));
                    seg_start = k;
                    i = k;
                    continue;
                }
            }
            _ => {}
        }
        i += 1;
    }
    if seg_start < end {
        spans.push((seg_start, end));
    }
    spans
}
