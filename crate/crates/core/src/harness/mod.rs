//! Multi-seed training runs and the files they produce.
//!
//! A suite written to `out/` looks like
//!
//! ```text
//! out/
//!   manifest.json        config echo and every output path
//!   summary.txt
//!   dqn/seed_1.csv ...   one trace per seed
//!   dqn/traces.svg       every seed of one algorithm
//! ```

mod csv;
mod plot;
mod run;
mod summary;

pub use self::csv::{
    format_csv, moving_average, parse_csv, read_csv, write_csv, write_smoothed_csv, HEADER,
    MOVING_AVERAGE_WINDOW,
};
pub use plot::{nice_ceiling, render_trace_plot, write_trace_plot};
pub use run::{
    random_baseline, run_suite, run_training, run_training_with, train_agent, EpisodeRecord, EpisodeTrace,
    SuiteResult, ACTION_STREAM, BASELINE_EPISODES, BASELINE_SEED, ENV_STREAM, INIT_STREAM,
};
pub use summary::{summaries, summarize, AlgorithmSummary, FINAL_WINDOW};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qnets::{ArchitectureConfig, Variant};
use crate::rl::TrainerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub algorithm: Variant,
    pub seed: u64,
    pub csv: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub trainer: TrainerConfig,
    pub algorithms: Vec<ArchitectureConfig>,
    pub seeds: Vec<u64>,
    pub random_baseline: f64,
    pub runs: Vec<RunEntry>,
    pub plots: BTreeMap<Variant, PathBuf>,
    pub summary: PathBuf,
}

pub fn trace_csv_path(out_dir: &Path, algorithm: Variant, seed: u64) -> PathBuf {
    out_dir.join(algorithm.tag()).join(format!("seed_{seed}.csv"))
}

/// Writes every trace, one plot per algorithm, the text summary and
/// `manifest.json` under `out_dir`. With `smoothed`, each run also gets a
/// `seed_<s>_ma50.csv` carrying a moving-average column.
pub fn write_suite_outputs(
    result: &SuiteResult,
    algorithms: &[ArchitectureConfig],
    trainer: &TrainerConfig,
    out_dir: &Path,
    smoothed: bool,
) -> Result<RunManifest> {
    let mut runs = Vec::new();
    let mut plots = BTreeMap::new();
    for algorithm in result.algorithms() {
        let dir = out_dir.join(algorithm.tag());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let traces = result.traces_for(algorithm);
        for t in &traces {
            let path = trace_csv_path(out_dir, algorithm, t.seed);
            write_csv(t, &path)?;
            if smoothed {
                write_smoothed_csv(t, dir.join(format!("seed_{}_ma{MOVING_AVERAGE_WINDOW}.csv", t.seed)))?;
            }
            runs.push(RunEntry {
                algorithm,
                seed: t.seed,
                csv: path,
            });
        }
        let plot = dir.join("traces.svg");
        write_trace_plot(&traces, &plot)?;
        plots.insert(algorithm, plot);
    }

    let summary = out_dir.join("summary.txt");
    fs::write(&summary, summarize(result)).map_err(|e| Error::io(&summary, e))?;

    let mut seeds: Vec<u64> = result.traces.iter().map(|t| t.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let manifest = RunManifest {
        trainer: trainer.clone(),
        algorithms: algorithms.to_vec(),
        seeds,
        random_baseline: result.random_baseline,
        runs,
        plots,
        summary,
    };
    let path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
