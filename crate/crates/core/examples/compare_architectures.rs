//! Trains DQN, DRQN and DTQN over a few seeds in parallel, writes traces,
//! plots and a summary, and prints the summary.
//!
//! ```bash
//! cargo run --release --example compare_architectures -- [episodes] [seeds] [out_dir]
//! ```

use std::path::PathBuf;

use polecart::harness::{run_suite, summarize, write_suite_outputs};
use polecart::qnets::{ArchitectureConfig, Variant};
use polecart::rl::TrainerConfig;

fn main() -> polecart::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes = args.next().and_then(|a| a.parse().ok()).unwrap_or(300);
    let seeds: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(3);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "runs/compare".into()));

    let algorithms: Vec<ArchitectureConfig> = Variant::ALL.iter().map(|&v| ArchitectureConfig::new(v)).collect();
    let trainer = TrainerConfig {
        episodes,
        ..TrainerConfig::default()
    };
    let seeds: Vec<u64> = (0..seeds).collect();
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let result = run_suite(&algorithms, &trainer, &seeds, jobs)?;

    std::fs::create_dir_all(&out).map_err(|e| polecart::Error::Invalid(e.to_string()))?;
    let manifest = write_suite_outputs(&result, &algorithms, &trainer, &out, false)?;
    print!("{}", summarize(&result));
    for (variant, plot) in &manifest.plots {
        println!("{variant}: {}", plot.display());
    }
    Ok(())
}
