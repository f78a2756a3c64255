//! Subcommand implementations. Each returns `Ok(true)` on success,
//! `Ok(false)` when it ran but a check failed, and `Err` on runtime errors.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tracereform::corpus::{load_corpus, segment, write_corpus, Corpus, Granularity, Method, TraceRecord};
use tracereform::lexmatch::{curve_from_scores, floor_violations, score_pairs};
use tracereform::rewriter::{reformulate_trace_detailed, summarize_trace_detailed, ValidationFailure};
use tracereform::selftalk::{classifier_metrics, term_frequency, Label, ScoredExample};
use tracereform::semantic::{embed_corpus, retrieval_eval, EmbeddingCache, Family};
use tracereform::tokenprob::{grad_norm_sq, load_prob_logs, selftalk_prob_gap, sft_loss, ProbLog, DEFAULT_STAGE};

use crate::config::RunConfig;
use crate::report::{ensure_distinct, ReportSink};
use crate::selftest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceField {
    Reasoning,
    Reformulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LabelArg {
    Original,
    Reformulated,
}

fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn jsonl_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, &row)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn load(path: &Path) -> Result<Corpus> {
    load_corpus(path).with_context(|| format!("loading corpus {}", path.display()))
}

fn prepare_outputs(inputs: &[PathBuf], out: Option<&Path>) -> Result<()> {
    match out {
        Some(o) => ensure_distinct(inputs, &[o]),
        None => Ok(()),
    }
}

pub fn corpus_validate(path: &Path) -> Result<bool> {
    let corpus = load(path)?;
    let mut methods: BTreeMap<String, usize> = BTreeMap::new();
    for r in &corpus {
        if let Some(m) = &r.method {
            *methods.entry(m.to_string()).or_default() += 1;
        }
    }
    let summary = json!({
        "path": path.display().to_string(),
        "records": corpus.len(),
        "with_reformulated": corpus.iter().filter(|r| r.reformulated.is_some()).count(),
        "methods": methods,
    });
    println!("{}", serde_json::to_string(&summary)?);
    Ok(true)
}

#[derive(Serialize)]
struct SegmentLine<'a> {
    id: &'a str,
    index: usize,
    granularity: Granularity,
    start: usize,
    end: usize,
    text: &'a str,
}

pub fn corpus_segment(cfg: &RunConfig, path: &Path, granularity: Granularity, out: Option<&Path>) -> Result<bool> {
    let inputs = vec![path.to_path_buf()];
    prepare_outputs(&inputs, out)?;
    let corpus = load(path)?;
    let mut lines = Vec::new();
    let mut n_segments = 0;
    for r in &corpus {
        let segs = segment(&r.reasoning, granularity);
        n_segments += segs.len();
        lines.extend(jsonl_bytes(segs.iter().enumerate().map(|(index, s)| SegmentLine {
            id: &r.id,
            index,
            granularity,
            start: s.start,
            end: s.end,
            text: &s.text,
        }))?);
    }
    let sink = ReportSink {
        command: "corpus segment",
        config: json!({"granularity": granularity, "eval": cfg.eval}),
        inputs,
    };
    sink.emit(out, &lines, json!({"records": corpus.len(), "segments": n_segments}))?;
    Ok(true)
}

pub fn rewrite_run(cfg: &RunConfig, corpus_path: &Path, out: &Path, baseline_summary: bool) -> Result<bool> {
    let inputs = vec![corpus_path.to_path_buf()];
    prepare_outputs(&inputs, Some(out))?;
    let corpus = load(corpus_path)?;
    let client = cfg.generation.build_generation_client()?;
    let run = if baseline_summary {
        summarize_trace_detailed
    } else {
        reformulate_trace_detailed
    };

    let mut records = Vec::with_capacity(corpus.len());
    let (mut chunks, mut warnings) = (0usize, 0usize);
    let mut failures: BTreeMap<&'static str, usize> = BTreeMap::new();
    for (i, record) in corpus.iter().enumerate() {
        log::info!("rewriting record {}/{} ({})", i + 1, corpus.len(), record.id);
        let outcome = run(record, &cfg.rewrite, client.as_ref())
            .with_context(|| format!("record `{}`", record.id))?;
        chunks += outcome.chunks.len();
        for c in &outcome.chunks {
            warnings += c.warnings.len();
            for f in c.validation.iter().flat_map(|v| &v.failures) {
                let name = match f {
                    ValidationFailure::SubMissing { .. } => "sub_missing",
                    ValidationFailure::OrderViolation { .. } => "order_violation",
                    ValidationFailure::ContentLoss { .. } => "content_loss",
                };
                *failures.entry(name).or_default() += 1;
            }
        }
        records.push(outcome.record);
    }
    let rewritten = Corpus::new(records)?;
    let mut bytes = Vec::new();
    write_corpus(&rewritten, &mut bytes)?;

    let sink = ReportSink {
        command: if baseline_summary { "rewrite run --baseline-summary" } else { "rewrite run" },
        config: json!({"generation": cfg.generation, "rewrite": cfg.rewrite}),
        inputs,
    };
    let summary = json!({
        "method": if baseline_summary { Method::Summary } else { Method::Part },
        "records": rewritten.len(),
        "chunks": chunks,
        "parse_warnings": warnings,
        "validation_failures": failures,
        "client": client.name(),
    });
    sink.emit(Some(out), &bytes, summary)?;
    Ok(true)
}

/// Groups reformulated records by method label, in first-seen order,
/// pairing each with its original trace.
fn lexical_pairs(original: &Corpus, reformulated: &[(PathBuf, Corpus)]) -> Result<Vec<(String, Vec<(String, String)>)>> {
    let by_id: HashMap<&str, &TraceRecord> = original.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut groups: Vec<(String, Vec<(String, String)>)> = Vec::new();
    for (path, corpus) in reformulated {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        for r in corpus {
            let Some(text) = &r.reformulated else {
                bail!("{}: record `{}` has no reformulated trace", path.display(), r.id);
            };
            let orig = by_id
                .get(r.id.as_str())
                .ok_or_else(|| anyhow!("{}: record `{}` has no original counterpart", path.display(), r.id))?;
            let method = r.method.as_ref().map_or_else(|| stem.clone(), |m| m.to_string());
            let pair = (orig.reasoning.clone(), text.clone());
            match groups.iter_mut().find(|(m, _)| *m == method) {
                Some((_, pairs)) => pairs.push(pair),
                None => groups.push((method, vec![pair])),
            }
        }
    }
    if groups.is_empty() {
        bail!("no reformulated records to evaluate");
    }
    Ok(groups)
}

pub fn eval_lexical(cfg: &RunConfig, original: &Path, reformulated: &[PathBuf], out: Option<&Path>) -> Result<bool> {
    let mut inputs = vec![original.to_path_buf()];
    inputs.extend(reformulated.iter().cloned());
    prepare_outputs(&inputs, out)?;
    let eval = cfg.eval.to_eval_config()?;
    let orig = load(original)?;
    let reform = reformulated
        .iter()
        .map(|p| Ok((p.clone(), load(p)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["threshold", "method", "match_ratio", "n_segments"])?;
    let mut summary = BTreeMap::new();
    for (method, pairs) in lexical_pairs(&orig, &reform)? {
        let scored = score_pairs(&pairs, eval.granularity)?;
        let curve = curve_from_scores(&scored, eval.thresholds())?;
        for p in curve.points() {
            writer.write_record([
                p.threshold.to_string(),
                method.clone(),
                format!("{:.6}", p.match_ratio),
                curve.n_segments.to_string(),
            ])?;
        }
        summary.insert(
            method,
            json!({
                "pairs": curve.n_pairs,
                "segments": curve.n_segments,
                "pairs_at_or_below_tau": floor_violations(&pairs, eval.tau),
            }),
        );
    }
    let bytes = writer.into_inner().map_err(|e| anyhow!("{e}"))?;
    let sink = ReportSink {
        command: "eval lexical",
        config: json!({"eval": cfg.eval}),
        inputs,
    };
    sink.emit(out, &bytes, json!({"tau": eval.tau, "methods": summary}))?;
    Ok(true)
}

fn texts(corpus: &Corpus, path: &Path, field: TraceField) -> Result<Vec<(String, String)>> {
    corpus
        .iter()
        .map(|r| Ok((r.id.clone(), trace_text(r, field).with_context(|| path.display().to_string())?.to_owned())))
        .collect()
}

fn trace_text(r: &TraceRecord, field: TraceField) -> Result<&str> {
    match field {
        TraceField::Reasoning => Ok(&r.reasoning),
        TraceField::Reformulated => r
            .reformulated
            .as_deref()
            .ok_or_else(|| anyhow!("record `{}` has no reformulated trace", r.id)),
    }
}

pub fn eval_semantic(cfg: &RunConfig, paths: [&PathBuf; 3], out: Option<&Path>) -> Result<bool> {
    let inputs: Vec<PathBuf> = paths.iter().map(|p| p.to_path_buf()).collect();
    prepare_outputs(&inputs, out)?;
    let client = cfg.embedding.build_embedding_client()?;
    let cache = cfg.embed.cache_dir.as_ref().map(EmbeddingCache::open).transpose()?;
    let spec = [
        (paths[0], TraceField::Reasoning, Family::Original),
        (paths[1], TraceField::Reformulated, Family::Part),
        (paths[2], TraceField::Reformulated, Family::Summary),
    ];
    let mut families = Vec::new();
    for (path, field, family) in spec {
        let items = texts(&load(path)?, path, field)?;
        log::info!("embedding {} {:?} texts", items.len(), family);
        families.push(
            embed_corpus(&items, family, client.as_ref(), &cfg.embed.settings, cache.as_ref())
                .with_context(|| format!("embedding {}", path.display()))?,
        );
    }
    let queries = families.remove(0);
    let candidates: Vec<_> = families.into_iter().flatten().collect();
    let outcome = retrieval_eval(&queries, &candidates)?;
    let report = json!({"model": client.model(), "retrieval": outcome});
    let sink = ReportSink {
        command: "eval semantic",
        config: json!({"embedding": cfg.embedding, "embed": cfg.embed}),
        inputs,
    };
    sink.emit(out, &to_json_bytes(&report)?, json!({"queries": outcome.n_queries, "ties": outcome.ties}))?;
    Ok(true)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScoredLine {
    pub id: String,
    pub label: Label,
    pub frequency: f64,
    pub hit_count: usize,
    pub word_count: usize,
}

pub fn detect_score(
    cfg: &RunConfig,
    corpus_path: &Path,
    field: TraceField,
    label: Option<LabelArg>,
    out: Option<&Path>,
) -> Result<bool> {
    let inputs = vec![corpus_path.to_path_buf()];
    prepare_outputs(&inputs, out)?;
    let lexicon = cfg.detect.load_lexicon()?;
    let corpus = load(corpus_path)?;
    let label = match label.unwrap_or(match field {
        TraceField::Reasoning => LabelArg::Original,
        TraceField::Reformulated => LabelArg::Reformulated,
    }) {
        LabelArg::Original => Label::Original,
        LabelArg::Reformulated => Label::Reformulated,
    };
    let lines = corpus
        .iter()
        .map(|r| {
            let tf = term_frequency(trace_text(r, field)?, &lexicon);
            Ok(ScoredLine {
                id: r.id.clone(),
                label,
                frequency: tf.frequency,
                hit_count: tf.hit_count,
                word_count: tf.word_count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sink = ReportSink {
        command: "detect score",
        config: json!({"field": field, "label": label, "lexicon": lexicon.keywords().collect::<Vec<_>>()}),
        inputs,
    };
    sink.emit(out, &jsonl_bytes(&lines)?, json!({"records": lines.len()}))?;
    Ok(true)
}

fn read_scored(path: &Path) -> Result<Vec<ScoredLine>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            serde_json::from_str(&line).with_context(|| format!("{}: line {}", path.display(), i + 1))?,
        );
    }
    Ok(rows)
}

pub fn detect_eval(cfg: &RunConfig, scored: &[PathBuf], out: Option<&Path>) -> Result<bool> {
    prepare_outputs(scored, out)?;
    let mut examples = Vec::new();
    for path in scored {
        examples.extend(read_scored(path)?.into_iter().map(|l| ScoredExample {
            score: l.frequency,
            label: l.label,
        }));
    }
    let report = classifier_metrics(&examples, cfg.detect.fpr)?;
    let sink = ReportSink {
        command: "detect eval",
        config: json!({"fpr": cfg.detect.fpr}),
        inputs: scored.to_vec(),
    };
    sink.emit(
        out,
        &to_json_bytes(&report)?,
        json!({"positives": report.n_positive, "negatives": report.n_negative}),
    )?;
    Ok(true)
}

pub fn probe_self_test() -> bool {
    let results = selftest::run_all();
    for r in &results {
        println!(
            "{} {}: {} cases, worst error {:.3e} (tolerance {:.0e}), {:.1} ms",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.cases,
            r.worst,
            r.tolerance,
            r.elapsed.as_secs_f64() * 1e3
        );
    }
    results.iter().all(|r| r.passed)
}

#[derive(Debug, Serialize)]
struct StageGradReport {
    stage: String,
    n_rows: usize,
    sft_loss: f64,
    mean_grad_norm_sq: f64,
    n_selftalk: usize,
    mean_grad_norm_sq_selftalk: Option<f64>,
}

/// Concatenates the logs of each stage, in first-appearance order.
fn by_stage(logs: Vec<ProbLog>) -> Vec<ProbLog> {
    let mut stages: Vec<ProbLog> = Vec::new();
    for log in logs {
        let label = log.stage.clone().unwrap_or_else(|| DEFAULT_STAGE.to_owned());
        match stages.iter_mut().find(|s| s.stage.as_deref() == Some(label.as_str())) {
            Some(s) => s.rows.extend(log.rows),
            None => stages.push(ProbLog::new(Some(label), log.rows)),
        }
    }
    stages
}

fn load_logs(path: &Path) -> Result<Vec<ProbLog>> {
    load_prob_logs(path).with_context(|| format!("loading probability log {}", path.display()))
}

pub fn probe_grad(cfg: &RunConfig, path: &Path, out: Option<&Path>) -> Result<bool> {
    let inputs = vec![path.to_path_buf()];
    prepare_outputs(&inputs, out)?;
    let lexicon = cfg.detect.load_lexicon()?;
    let mut reports = Vec::new();
    for stage in by_stage(load_logs(path)?) {
        let rows = stage.full_rows()?;
        let norms: Vec<f64> = rows.iter().map(|r| grad_norm_sq(r)).collect();
        let hits: Vec<f64> = rows
            .iter()
            .zip(&norms)
            .filter(|(r, _)| r.token_text().is_some_and(|t| lexicon.matches_token(t)))
            .map(|(_, &n)| n)
            .collect();
        reports.push(StageGradReport {
            stage: stage.stage.clone().unwrap_or_default(),
            n_rows: rows.len(),
            sft_loss: sft_loss(&stage)?,
            mean_grad_norm_sq: norms.iter().sum::<f64>() / norms.len() as f64,
            n_selftalk: hits.len(),
            mean_grad_norm_sq_selftalk: (!hits.is_empty()).then(|| hits.iter().sum::<f64>() / hits.len() as f64),
        });
    }
    let sink = ReportSink {
        command: "probe grad",
        config: json!({"lexicon": lexicon.keywords().collect::<Vec<_>>()}),
        inputs,
    };
    sink.emit(out, &to_json_bytes(&reports)?, json!({"stages": reports.len()}))?;
    Ok(true)
}

pub fn probe_gap(cfg: &RunConfig, path: &Path, out: Option<&Path>) -> Result<bool> {
    let inputs = vec![path.to_path_buf()];
    prepare_outputs(&inputs, out)?;
    let lexicon = cfg.detect.load_lexicon()?;
    let reports = selftalk_prob_gap(&load_logs(path)?, &lexicon)?;
    let undefined = reports.iter().filter(|r| r.gap.is_none()).count();
    if undefined > 0 {
        log::warn!("{undefined} stage(s) have no self-talk tokens; their gap is undefined");
    }
    let sink = ReportSink {
        command: "probe gap",
        config: json!({"lexicon": lexicon.keywords().collect::<Vec<_>>()}),
        inputs,
    };
    sink.emit(out, &to_json_bytes(&reports)?, json!({"stages": reports.len(), "undefined_gaps": undefined}))?;
    Ok(true)
}
