use std::fmt::Write as _;

use super::run::SuiteResult;
use crate::qnets::Variant;

/// Episodes at the end of each trace that count as "final".
pub const FINAL_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: Variant,
    /// Mean over seeds of each seed's final-window mean score.
    pub mean_final_score: f64,
    pub max_score: usize,
    /// `(seed, max score, final-window mean)`.
    pub per_seed: Vec<(u64, usize, f64)>,
    /// Seeds whose final-window mean exceeds the random baseline.
    pub seeds_above_baseline: usize,
}

pub fn summaries(result: &SuiteResult) -> Vec<AlgorithmSummary> {
    result
        .algorithms()
        .into_iter()
        .map(|algorithm| {
            let traces = result.traces_for(algorithm);
            let per_seed: Vec<(u64, usize, f64)> = traces
                .iter()
                .map(|t| (t.seed, t.max_score(), t.final_mean(FINAL_WINDOW)))
                .collect();
            AlgorithmSummary {
                algorithm,
                mean_final_score: per_seed.iter().map(|p| p.2).sum::<f64>() / per_seed.len() as f64,
                max_score: per_seed.iter().map(|p| p.1).max().unwrap_or(0),
                seeds_above_baseline: per_seed.iter().filter(|p| p.2 > result.random_baseline).count(),
                per_seed,
            }
        })
        .collect()
}

pub fn summarize(result: &SuiteResult) -> String {
    let mut out = String::new();
    writeln!(out, "random-policy baseline: {:.2}", result.random_baseline).unwrap();
    for s in summaries(result) {
        writeln!(
            out,
            "{}: seeds={} mean_final{}={:.2} max={} seeds_above_baseline={}/{}",
            s.algorithm,
            s.per_seed.len(),
            FINAL_WINDOW,
            s.mean_final_score,
            s.max_score,
            s.seeds_above_baseline,
            s.per_seed.len()
        )
        .unwrap();
        for (seed, max, fin) in &s.per_seed {
            writeln!(out, "  seed {seed}: max={max} mean_final{FINAL_WINDOW}={fin:.2}").unwrap();
        }
    }
    out
}
