//! Built-in numerical checks of the gradient formulas, run by
//! `probe grad --self-test`.

use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use tracereform::tokenprob::{grad_logits, grad_norm_sq, softmax, softmax_row, token_loss, LogitsRow, ProbRow};

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Random distribution over `v` entries; `sharpness` scales the logits so
/// some rows are near-uniform and others nearly one-hot.
fn random_row(rng: &mut StdRng, v: usize) -> ProbRow {
    let sharpness = rng.gen_range(0.0..12.0);
    let logits: Vec<f64> = (0..v).map(|_| rng.gen_range(-1.0..1.0) * sharpness).collect();
    let target = rng.gen_range(0..v);
    softmax_row(&LogitsRow::new(logits).expect("finite"), target).expect("valid row")
}

/// `grad_norm_sq` against the squared norm of the explicit gradient vector.
pub fn norm_identity(cases: usize, max_vocab: usize, seed: u64) -> SuiteResult {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let v = rng.gen_range(1..=max_vocab);
        let row = random_row(&mut rng, v);
        let direct: f64 = grad_logits(&row).iter().map(|g| g * g).sum();
        worst = worst.max((grad_norm_sq(&row) - direct).abs());
    }
    let tolerance = 1e-12;
    SuiteResult {
        name: "gradient norm identity",
        cases,
        worst,
        tolerance,
        passed: worst < tolerance,
        elapsed: start.elapsed(),
    }
}

fn loss_at(logits: &[f64], target: usize) -> f64 {
    let p = softmax(&LogitsRow::new(logits.to_vec()).expect("finite"));
    -p[target].ln()
}

/// Analytic logit gradient against central differences of the loss.
///
/// The error of one case is `max_i |g_i - fd_i| / max(max_i |g_i|, max_i |fd_i|)`.
pub fn finite_differences(cases: usize, max_vocab: usize, step: f64, seed: u64) -> SuiteResult {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let v = rng.gen_range(2..=max_vocab);
        let logits: Vec<f64> = (0..v).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let target = rng.gen_range(0..v);
        let row = softmax_row(&LogitsRow::new(logits.clone()).expect("finite"), target).expect("valid row");
        debug_assert!(token_loss(&row).is_ok());
        let analytic = grad_logits(&row);
        let mut numeric = Vec::with_capacity(v);
        let mut z = logits.clone();
        for i in 0..v {
            z[i] = logits[i] + step;
            let up = loss_at(&z, target);
            z[i] = logits[i] - step;
            let down = loss_at(&z, target);
            z[i] = logits[i];
            numeric.push((up - down) / (2.0 * step));
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
        let scale = analytic.iter().chain(&numeric).map(|x| x.abs()).fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    let tolerance = 1e-6;
    SuiteResult {
        name: "gradient vs finite differences",
        cases,
        worst,
        tolerance,
        passed: worst < tolerance,
        elapsed: start.elapsed(),
    }
}

/// The default self-test: both suites at their reference sizes.
pub fn run_all() -> Vec<SuiteResult> {
    vec![norm_identity(1000, 64, 0x5eed), finite_differences(100, 16, 1e-5, 0xfd)]
}
