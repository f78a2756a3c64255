//! Character-level fuzzy matching: normalized Indel similarity, partial-ratio
//! alignment of a needle inside a haystack, and segment match ratios over a
//! grid of similarity thresholds.

mod lcs;

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{segment, Granularity, Segment};
use crate::error::{Error, Result};
use crate::text::normalize_for_matching;

use lcs::{lcs_len, PatternMasks};

/// A similarity in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub fn value(self) -> f64 {
        self.0
    }

    fn from_lcs(lcs: usize, len_a: usize, len_b: usize) -> Self {
        let total = len_a + len_b;
        if total == 0 {
            return SimilarityScore(1.0);
        }
        SimilarityScore(2.0 * lcs as f64 / total as f64)
    }
}

/// `1 - indel(a, b) / (|a| + |b|)` over characters, i.e. `2 LCS / (|a| + |b|)`.
/// Two empty strings score 1. No normalization is applied.
pub fn indel_similarity(a: &str, b: &str) -> SimilarityScore {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    SimilarityScore::from_lcs(lcs_len(&a, &b), a.len(), b.len())
}

/// Best-matching window of a haystack. Offsets are character positions in
/// the haystack exactly as passed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub score: SimilarityScore,
    pub hay_start: usize,
    pub hay_end: usize,
}

/// Maximum [`indel_similarity`] between `needle` and any haystack window of
/// length 1 to `2 * |needle|`.
///
/// Ties resolve to the smallest start, then the shortest window. An empty
/// haystack yields score 0 with an empty window; an empty needle is an error.
pub fn partial_ratio_alignment(needle: &str, haystack: &str) -> Result<Alignment> {
    let needle: Vec<char> = needle.chars().collect();
    let haystack: Vec<char> = haystack.chars().collect();
    align_chars(&needle, &haystack)
}

fn align_chars(needle: &[char], hay: &[char]) -> Result<Alignment> {
    if needle.is_empty() {
        return Err(Error::InvalidInput("empty needle".into()));
    }
    if hay.is_empty() {
        return Ok(Alignment {
            score: SimilarityScore(0.0),
            hay_start: 0,
            hay_end: 0,
        });
    }
    let masks = PatternMasks::new(needle);
    let n = masks.len();
    let max_window = 2 * n;

    // (lcs, start, len); with no common character every window scores 0 and
    // the tie rule picks the first single-character window.
    let mut best = (0usize, 0usize, 1usize);
    'starts: for start in 0..hay.len() {
        // a window opening on a character absent from the needle is strictly
        // beaten by the same window without it
        if !masks.contains(hay[start]) {
            continue;
        }
        let mut state = masks.state();
        let stop = hay.len().min(start + max_window);
        for end in start..stop {
            state.push(hay[end]);
            let lcs = state.lcs();
            let len = end - start + 1;
            // lcs / (n + len) > best_lcs / (n + best_len)
            if lcs * (n + best.2) > best.0 * (n + len) {
                best = (lcs, start, len);
                if lcs == n && len == n {
                    break 'starts;
                }
            }
        }
    }
    let (lcs, start, len) = best;
    Ok(Alignment {
        score: SimilarityScore::from_lcs(lcs, n, len),
        hay_start: start,
        hay_end: start + len,
    })
}

/// Threshold grid and segmentation settings for lexical evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    thresholds: Vec<f64>,
    pub granularity: Granularity,
    /// Trace-level similarity floor; pairs at or below it are counted in
    /// [`floor_violations`].
    pub tau: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            thresholds: ThresholdGrid::default().values(),
            granularity: Granularity::Sentence,
            tau: 0.7,
        }
    }
}

impl EvalConfig {
    pub fn new(thresholds: Vec<f64>, granularity: Granularity, tau: f64) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::InvalidInput("threshold grid is empty".into()));
        }
        if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidInput("thresholds must lie in [0, 1]".into()));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("thresholds must be strictly ascending".into()));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidInput(format!("tau {tau} outside [0, 1]")));
        }
        Ok(EvalConfig {
            thresholds,
            granularity,
            tau,
        })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }
}

/// `start:stop:step`, inclusive of `stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        ThresholdGrid {
            start: 0.5,
            stop: 1.0,
            step: 0.05,
        }
    }
}

impl ThresholdGrid {
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| {
                let t = self.start + i as f64 * self.step;
                (t * 1e9).round() / 1e9
            })
            .collect()
    }
}

impl FromStr for ThresholdGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidInput(format!("bad threshold grid `{s}`; expected start:stop:step"));
        let [a, b, c] = parts.as_slice() else {
            return Err(bad());
        };
        let parse = |x: &str| x.trim().parse::<f64>().map_err(|_| bad());
        let grid = ThresholdGrid {
            start: parse(a)?,
            stop: parse(b)?,
            step: parse(c)?,
        };
        if !(grid.step > 0.0) || grid.stop < grid.start {
            return Err(bad());
        }
        Ok(grid)
    }
}

/// Best alignment score of every segment against the reformulated text,
/// after whitespace and NFC normalization of both sides.
pub fn segment_scores(segments: &[Segment], reformulated: &str) -> Result<Vec<f64>> {
    let hay: Vec<char> = normalize_for_matching(reformulated).chars().collect();
    segments
        .iter()
        .map(|s| {
            let needle: Vec<char> = normalize_for_matching(&s.text).chars().collect();
            align_chars(&needle, &hay).map(|a| a.score.value())
        })
        .collect()
}

fn share_at_least(scores: &[f64], threshold: f64) -> f64 {
    scores.iter().filter(|&&s| s >= threshold).count() as f64 / scores.len() as f64
}

/// Fraction of `original_segments` whose best score in `reformulated` is at
/// least `threshold`.
pub fn match_ratio(original_segments: &[Segment], reformulated: &str, threshold: f64) -> Result<f64> {
    if original_segments.is_empty() {
        return Err(Error::InvalidInput("no segments to match".into()));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidInput(format!("threshold {threshold} outside [0, 1]")));
    }
    Ok(share_at_least(&segment_scores(original_segments, reformulated)?, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub match_ratio: f64,
}

/// Match ratio over a threshold grid, averaged per pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchCurve {
    points: Vec<CurvePoint>,
    pub n_pairs: usize,
    pub n_segments: usize,
}

impl MatchCurve {
    fn new(points: Vec<CurvePoint>, n_pairs: usize, n_segments: usize) -> Result<Self> {
        let ok = points.windows(2).all(|w| {
            w[0].threshold < w[1].threshold && w[1].match_ratio <= w[0].match_ratio
        }) && points
            .iter()
            .all(|p| (0.0..=1.0).contains(&p.threshold) && (0.0..=1.0).contains(&p.match_ratio));
        if !ok {
            return Err(Error::InvalidInput("match curve is not monotone".into()));
        }
        Ok(MatchCurve {
            points,
            n_pairs,
            n_segments,
        })
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn at(&self, threshold: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| p.threshold == threshold)
            .map(|p| p.match_ratio)
    }
}

/// Per-pair segment scores; the expensive part of a curve, reusable across grids.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScores {
    pub scores: Vec<f64>,
}

/// Segments each original trace and scores its segments against the paired
/// reformulation. Pairs are processed in parallel; output keeps pair order.
pub fn score_pairs<S: AsRef<str> + Sync>(
    pairs: &[(S, S)],
    granularity: Granularity,
) -> Result<Vec<PairScores>> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, (orig, reform))| {
            let segs = segment(orig.as_ref(), granularity);
            if segs.is_empty() {
                return Err(Error::InvalidInput(format!("pair {i}: original trace has no segments")));
            }
            Ok(PairScores {
                scores: segment_scores(&segs, reform.as_ref())?,
            })
        })
        .collect()
}

/// Macro-averaged curve from precomputed pair scores.
pub fn curve_from_scores(scored: &[PairScores], thresholds: &[f64]) -> Result<MatchCurve> {
    if scored.is_empty() {
        return Err(Error::InvalidInput("no pairs to evaluate".into()));
    }
    let points = thresholds
        .iter()
        .map(|&threshold| {
            let sum: f64 = scored.iter().map(|p| share_at_least(&p.scores, threshold)).sum();
            CurvePoint {
                threshold,
                match_ratio: sum / scored.len() as f64,
            }
        })
        .collect();
    let n_segments = scored.iter().map(|p| p.scores.len()).sum();
    MatchCurve::new(points, scored.len(), n_segments)
}

/// Match curve of (original, reformulated) trace pairs.
pub fn match_curve<S: AsRef<str> + Sync>(pairs: &[(S, S)], cfg: &EvalConfig) -> Result<MatchCurve> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no pairs to evaluate".into()));
    }
    let scored = score_pairs(pairs, cfg.granularity)?;
    curve_from_scores(&scored, cfg.thresholds())
}

/// Number of pairs whose whole-trace similarity does not exceed `tau`.
pub fn floor_violations<S: AsRef<str> + Sync>(pairs: &[(S, S)], tau: f64) -> usize {
    pairs
        .par_iter()
        .filter(|(a, b)| {
            let a = normalize_for_matching(a.as_ref());
            let b = normalize_for_matching(b.as_ref());
            indel_similarity(&a, &b).value() <= tau
        })
        .count()
}
