use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::CartPole;
use crate::error::{Error, Result};
use crate::qnets::{init_parameters, ArchitectureConfig, Variant};
use crate::rl::{random_policy_scores, Trainer, TrainerConfig};
use crate::stream;

/// Offsets added to the master seed for the parameter-init, environment and
/// action/replay streams.
pub const INIT_STREAM: u64 = 0;
pub const ENV_STREAM: u64 = 1000;
pub const ACTION_STREAM: u64 = 2000;

/// Seed of the random-policy baseline reported alongside every suite.
pub const BASELINE_SEED: u64 = 0x5eed;
pub const BASELINE_EPISODES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// 1-based.
    pub episode: usize,
    pub score: usize,
    pub mean_loss: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub algorithm: Variant,
    pub seed: u64,
    pub records: Vec<EpisodeRecord>,
}

impl EpisodeTrace {
    pub fn scores(&self) -> impl Iterator<Item = usize> + '_ {
        self.records.iter().map(|r| r.score)
    }

    pub fn max_score(&self) -> usize {
        self.scores().max().unwrap_or(0)
    }

    /// Mean score over the last `n` episodes (all of them if fewer).
    pub fn final_mean(&self, n: usize) -> f64 {
        let tail = &self.records[self.records.len().saturating_sub(n)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().map(|r| r.score as f64).sum::<f64>() / tail.len() as f64
    }
}

pub fn run_training(arch: &ArchitectureConfig, trainer: &TrainerConfig, seed: u64) -> Result<EpisodeTrace> {
    run_training_with(arch, trainer, seed, |_| {})
}

/// Like [`run_training`], calling `on_episode` after each episode.
pub fn run_training_with(
    arch: &ArchitectureConfig,
    trainer: &TrainerConfig,
    seed: u64,
    on_episode: impl FnMut(&EpisodeRecord),
) -> Result<EpisodeTrace> {
    train_agent(arch, trainer, seed, on_episode).map(|(trace, _)| trace)
}

/// Like [`run_training_with`], also returning the trained agent.
pub fn train_agent(
    arch: &ArchitectureConfig,
    trainer: &TrainerConfig,
    seed: u64,
    mut on_episode: impl FnMut(&EpisodeRecord),
) -> Result<(EpisodeTrace, Trainer)> {
    let params = init_parameters(arch, &mut stream(seed.wrapping_add(INIT_STREAM)))?;
    let mut t = Trainer::new(
        arch.clone(),
        trainer.clone(),
        params,
        stream(seed.wrapping_add(ENV_STREAM)),
        stream(seed.wrapping_add(ACTION_STREAM)),
    )?;
    let mut records = Vec::with_capacity(trainer.episodes);
    for episode in 1..=trainer.episodes {
        let stats = t.run_episode()?;
        let record = EpisodeRecord {
            episode,
            score: stats.score,
            mean_loss: stats.mean_loss,
            epsilon: stats.epsilon,
        };
        on_episode(&record);
        records.push(record);
    }
    let trace = EpisodeTrace {
        algorithm: arch.variant,
        seed,
        records,
    };
    Ok((trace, t))
}

/// Mean score of the uniformly random policy.
pub fn random_baseline(episodes: usize, seed: u64) -> Result<f64> {
    let scores = random_policy_scores(&CartPole::default(), episodes, &mut stream(seed))?;
    Ok(scores.iter().sum::<usize>() as f64 / scores.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    /// Sorted by (algorithm, seed).
    pub traces: Vec<EpisodeTrace>,
    pub random_baseline: f64,
}

impl SuiteResult {
    pub fn algorithms(&self) -> Vec<Variant> {
        let mut v: Vec<Variant> = self.traces.iter().map(|t| t.algorithm).collect();
        v.dedup();
        v
    }

    pub fn traces_for(&self, algorithm: Variant) -> Vec<&EpisodeTrace> {
        self.traces.iter().filter(|t| t.algorithm == algorithm).collect()
    }
}

/// Trains every (algorithm, seed) pair on a pool of at most `jobs` threads.
/// The result does not depend on `jobs` or on completion order.
pub fn run_suite(
    algorithms: &[ArchitectureConfig],
    trainer: &TrainerConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<SuiteResult> {
    if algorithms.is_empty() {
        return Err(Error::Invalid("suite needs at least one algorithm".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Invalid("suite needs at least one seed".into()));
    }
    let mut variants: Vec<Variant> = algorithms.iter().map(|a| a.variant).collect();
    variants.sort();
    variants.dedup();
    if variants.len() != algorithms.len() {
        return Err(Error::Invalid("each algorithm may appear only once in a suite".into()));
    }
    let mut unique = seeds.to_vec();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() != seeds.len() {
        return Err(Error::Invalid("duplicate seeds in suite".into()));
    }
    trainer.validate()?;
    for a in algorithms {
        a.validate()?;
    }

    let jobs_list: Vec<(&ArchitectureConfig, u64)> = algorithms
        .iter()
        .flat_map(|a| seeds.iter().map(move |&s| (a, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<EpisodeTrace>> = pool.install(|| {
        jobs_list
            .par_iter()
            .map(|(arch, seed)| {
                run_training(arch, trainer, *seed).map_err(|e| Error::Run {
                    algorithm: arch.variant.to_string(),
                    seed: *seed,
                    source: Box::new(e),
                })
            })
            .collect()
    });
    let mut traces = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    traces.sort_by_key(|t| (t.algorithm, t.seed));

    Ok(SuiteResult {
        traces,
        random_baseline: random_baseline(BASELINE_EPISODES, BASELINE_SEED)?,
    })
}
