//! Per-run trace files: `episode,score,mean_loss,epsilon`, one row per
//! episode, `\n` line endings.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::run::{EpisodeRecord, EpisodeTrace};
use crate::error::{Error, Result};
use crate::qnets::Variant;

pub const HEADER: &str = "episode,score,mean_loss,epsilon";

/// Window of the optional smoothed-score column.
pub const MOVING_AVERAGE_WINDOW: usize = 50;

pub fn format_csv(trace: &EpisodeTrace) -> String {
    let mut out = String::with_capacity(32 * (trace.records.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in &trace.records {
        writeln!(out, "{},{},{:.9e},{:.6}", r.episode, r.score, r.mean_loss, r.epsilon).expect("string write");
    }
    out
}

pub fn write_csv(trace: &EpisodeTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_csv(trace)).map_err(|e| Error::io(path, e))
}

/// Trailing mean over up to `window` episodes ending at each episode.
pub fn moving_average(scores: &[usize], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(scores.len());
    let mut sum = 0usize;
    for i in 0..scores.len() {
        sum += scores[i];
        if i >= window {
            sum -= scores[i - window];
        }
        out.push(sum as f64 / (i + 1).min(window) as f64);
    }
    out
}

/// Same rows as [`write_csv`] plus a `score_ma50` column.
pub fn write_smoothed_csv(trace: &EpisodeTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let scores: Vec<usize> = trace.scores().collect();
    let ma = moving_average(&scores, MOVING_AVERAGE_WINDOW);
    let mut out = format!("{HEADER},score_ma{MOVING_AVERAGE_WINDOW}\n");
    for (r, m) in trace.records.iter().zip(ma) {
        writeln!(
            out,
            "{},{},{:.9e},{:.6},{:.4}",
            r.episode, r.score, r.mean_loss, r.epsilon, m
        )
        .expect("string write");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parses a trace written by [`write_csv`]. Algorithm and seed are not
/// stored in the file and must be supplied.
pub fn parse_csv(text: &str, algorithm: Variant, seed: u64) -> Result<EpisodeTrace> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if !header.starts_with(HEADER) {
        return Err(Error::Invalid(format!("unexpected CSV header `{header}`")));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let bad = || Error::Invalid(format!("malformed CSV row {}: `{line}`", i + 2));
        if fields.len() < 4 {
            return Err(bad());
        }
        records.push(EpisodeRecord {
            episode: fields[0].parse().map_err(|_| bad())?,
            score: fields[1].parse().map_err(|_| bad())?,
            mean_loss: fields[2].parse().map_err(|_| bad())?,
            epsilon: fields[3].parse().map_err(|_| bad())?,
        });
    }
    Ok(EpisodeTrace {
        algorithm,
        seed,
        records,
    })
}

pub fn read_csv(path: impl AsRef<Path>, algorithm: Variant, seed: u64) -> Result<EpisodeTrace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, algorithm, seed)
}
