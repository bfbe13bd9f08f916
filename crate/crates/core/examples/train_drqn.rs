//! Trains a DRQN agent on the partially observable CartPole and prints a
//! running score.
//!
//! ```bash
//! cargo run --release --example train_drqn -- [episodes] [seed]
//! ```

use std::time::Instant;

use polecart::harness::{run_training_with, FINAL_WINDOW};
use polecart::qnets::{ArchitectureConfig, Variant};
use polecart::rl::TrainerConfig;

fn main() -> polecart::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes = args.next().and_then(|a| a.parse().ok()).unwrap_or(300);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);

    let arch = ArchitectureConfig::new(Variant::Drqn);
    let trainer = TrainerConfig {
        episodes,
        ..TrainerConfig::default()
    };
    let start = Instant::now();
    let mut recent = Vec::new();
    let trace = run_training_with(&arch, &trainer, seed, |r| {
        recent.push(r.score);
        if r.episode % 50 == 0 {
            let tail = &recent[recent.len().saturating_sub(50)..];
            let mean = tail.iter().sum::<usize>() as f64 / tail.len() as f64;
            println!(
                "episode {:>5}  mean50 {:>7.2}  loss {:>9.4}  eps {:.3}  {:>6.1}s",
                r.episode,
                mean,
                r.mean_loss,
                r.epsilon,
                start.elapsed().as_secs_f64()
            );
        }
    })?;
    println!(
        "seed {seed}: max {} final-{FINAL_WINDOW} mean {:.2}",
        trace.max_score(),
        trace.final_mean(FINAL_WINDOW)
    );
    Ok(())
}
