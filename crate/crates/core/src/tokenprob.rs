//! Token-level cross-entropy: loss, logit gradient, gradient norm, and the
//! probability-gap report for self-talk tokens.
//!
//! Probability logs come from an external student model; nothing here runs a
//! model. A log row is either a full distribution over the vocabulary or the
//! compact form that only carries the probability of the target token.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selftalk::SelfTalkLexicon;

const SUM_TOLERANCE: f64 = 1e-9;

/// A distribution over the vocabulary at one position plus the target index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbRow {
    probs: Vec<f64>,
    target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    token_text: Option<String>,
}

impl ProbRow {
    pub fn new(probs: Vec<f64>, target: usize) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidInput("empty probability vector".into()));
        }
        if target >= probs.len() {
            return Err(Error::InvalidInput(format!(
                "target {target} out of range for vocabulary of {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidInput(format!("probability {p} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(ProbRow {
            probs,
            target,
            token_text: None,
        })
    }

    pub fn with_token_text(mut self, text: impl Into<String>) -> Self {
        self.token_text = Some(text.into());
        self
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn token_text(&self) -> Option<&str> {
        self.token_text.as_deref()
    }

    pub fn target_prob(&self) -> f64 {
        self.probs[self.target]
    }

    pub fn vocab_size(&self) -> usize {
        self.probs.len()
    }
}

/// Raw logits at one position.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitsRow(Vec<f64>);

impl LogitsRow {
    pub fn new(logits: Vec<f64>) -> Result<Self> {
        if logits.is_empty() {
            return Err(Error::InvalidInput("empty logits vector".into()));
        }
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidInput("non-finite logit".into()));
        }
        Ok(LogitsRow(logits))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: &LogitsRow) -> Vec<f64> {
    let z = logits.values();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Softmax packaged as a [`ProbRow`] with the given target.
pub fn softmax_row(logits: &LogitsRow, target: usize) -> Result<ProbRow> {
    let probs = softmax(logits);
    if target >= probs.len() {
        return Err(Error::InvalidInput(format!("target {target} out of range")));
    }
    Ok(ProbRow {
        probs,
        target,
        token_text: None,
    })
}

fn loss_from_prob(p: f64) -> Result<f64> {
    if p <= 0.0 {
        return Err(Error::InfiniteLoss);
    }
    Ok(-p.ln())
}

/// Negative log-probability of the target token.
pub fn token_loss(row: &ProbRow) -> Result<f64> {
    loss_from_prob(row.target_prob())
}

/// Gradient of the token loss with respect to the logits: `p - onehot(target)`.
pub fn grad_logits(row: &ProbRow) -> Vec<f64> {
    let mut g = row.probs.clone();
    g[row.target] -= 1.0;
    g
}

/// Closed form of `|grad_logits(row)|^2`: `sum p_i^2 + 1 - 2 p_target`.
pub fn grad_norm_sq(row: &ProbRow) -> f64 {
    let sum_sq: f64 = row.probs.iter().map(|p| p * p).sum();
    sum_sq + 1.0 - 2.0 * row.target_prob()
}

/// One position of a probability log, in full or compact form.
#[derive(Debug, Clone, PartialEq)]
pub enum LogRow {
    Full(ProbRow),
    Compact {
        token_text: Option<String>,
        target_prob: f64,
    },
}

impl LogRow {
    pub fn target_prob(&self) -> f64 {
        match self {
            LogRow::Full(r) => r.target_prob(),
            LogRow::Compact { target_prob, .. } => *target_prob,
        }
    }

    pub fn token_text(&self) -> Option<&str> {
        match self {
            LogRow::Full(r) => r.token_text(),
            LogRow::Compact { token_text, .. } => token_text.as_deref(),
        }
    }

    pub fn as_full(&self) -> Option<&ProbRow> {
        match self {
            LogRow::Full(r) => Some(r),
            LogRow::Compact { .. } => None,
        }
    }
}

/// Token rows for one sequence, optionally tagged with a training-stage label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProbLog {
    pub stage: Option<String>,
    pub rows: Vec<LogRow>,
}

impl ProbLog {
    pub fn new(stage: Option<String>, rows: Vec<LogRow>) -> Self {
        ProbLog { stage, rows }
    }

    pub fn from_full(stage: Option<String>, rows: Vec<ProbRow>) -> Self {
        ProbLog {
            stage,
            rows: rows.into_iter().map(LogRow::Full).collect(),
        }
    }

    /// All rows as full distributions, or an error naming the first compact row.
    pub fn full_rows(&self) -> Result<Vec<&ProbRow>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.as_full().ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "row {i} is in compact form (target_prob only); this operation needs full `probs` vectors"
                    ))
                })
            })
            .collect()
    }
}

/// Mean token loss over a log.
pub fn sft_loss(log: &ProbLog) -> Result<f64> {
    if log.rows.is_empty() {
        return Err(Error::InvalidInput("empty probability log".into()));
    }
    let mut total = 0.0;
    for row in &log.rows {
        total += loss_from_prob(row.target_prob())?;
    }
    Ok(total / log.rows.len() as f64)
}

/// Average target probability overall versus on self-talk tokens, per stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageGapReport {
    pub stage: String,
    pub n_rows: usize,
    pub avg_all: f64,
    pub n_selftalk: usize,
    /// `None` when the stage has no self-talk tokens.
    pub avg_selftalk: Option<f64>,
    /// `avg_all - avg_selftalk`; `None` when undefined.
    pub gap: Option<f64>,
}

pub const DEFAULT_STAGE: &str = "default";

/// Builds one report per distinct stage label, in order of first appearance.
/// Logs without a stage label are grouped under [`DEFAULT_STAGE`].
pub fn selftalk_prob_gap(logs: &[ProbLog], lexicon: &SelfTalkLexicon) -> Result<Vec<StageGapReport>> {
    #[derive(Default)]
    struct Acc {
        order: usize,
        n: usize,
        sum: f64,
        n_hit: usize,
        sum_hit: f64,
    }
    let mut stages: BTreeMap<String, Acc> = BTreeMap::new();
    for log in logs {
        if log.rows.is_empty() {
            return Err(Error::InvalidInput("empty probability log".into()));
        }
        let label = log.stage.clone().unwrap_or_else(|| DEFAULT_STAGE.to_owned());
        let next = stages.len();
        let acc = stages.entry(label).or_insert_with(|| Acc {
            order: next,
            ..Acc::default()
        });
        for (i, row) in log.rows.iter().enumerate() {
            let text = row.token_text().ok_or_else(|| {
                Error::InvalidInput(format!("row {i} has no token_text"))
            })?;
            let p = row.target_prob();
            acc.n += 1;
            acc.sum += p;
            if lexicon.matches_token(text) {
                acc.n_hit += 1;
                acc.sum_hit += p;
            }
        }
    }
    let mut reports: Vec<(usize, StageGapReport)> = stages
        .into_iter()
        .map(|(stage, a)| {
            let avg_all = a.sum / a.n as f64;
            let avg_selftalk = (a.n_hit > 0).then(|| a.sum_hit / a.n_hit as f64);
            (
                a.order,
                StageGapReport {
                    stage,
                    n_rows: a.n,
                    avg_all,
                    n_selftalk: a.n_hit,
                    avg_selftalk,
                    gap: avg_selftalk.map(|s| avg_all - s),
                },
            )
        })
        .collect();
    reports.sort_by_key(|(order, _)| *order);
    Ok(reports.into_iter().map(|(_, r)| r).collect())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLogLine {
    #[serde(default)]
    stage: Option<String>,
    #[serde(default)]
    token_text: Option<String>,
    #[serde(default)]
    target_index: Option<usize>,
    #[serde(default)]
    probs: Option<Vec<f64>>,
    #[serde(default)]
    target_prob: Option<f64>,
}

/// Reads a probability-log file. Consecutive lines with the same stage label
/// form one [`ProbLog`]; a change of label starts a new log.
pub fn load_prob_logs(path: impl AsRef<Path>) -> Result<Vec<ProbLog>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_prob_logs(BufReader::new(file))
}

pub fn read_prob_logs(reader: impl BufRead) -> Result<Vec<ProbLog>> {
    let mut logs: Vec<ProbLog> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: idx + 1,
            message,
        };
        let raw: RawLogLine =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let row = match (raw.probs, raw.target_index, raw.target_prob) {
            (Some(probs), Some(target), None) => {
                let mut row = ProbRow::new(probs, target).map_err(|e| parse_err(e.to_string()))?;
                row.token_text = raw.token_text;
                LogRow::Full(row)
            }
            (None, None, Some(p)) => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(parse_err(format!("target_prob {p} outside [0, 1]")));
                }
                LogRow::Compact {
                    token_text: raw.token_text,
                    target_prob: p,
                }
            }
            _ => {
                return Err(parse_err(
                    "expected either {probs, target_index} or {target_prob}".into(),
                ))
            }
        };
        match logs.last_mut() {
            Some(last) if last.stage == raw.stage => last.rows.push(row),
            _ => logs.push(ProbLog::new(raw.stage, vec![row])),
        }
    }
    Ok(logs)
}
