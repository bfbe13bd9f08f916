//! Trains a DQN briefly, saves its parameters, reloads them and checks that
//! the reloaded network gives bit-identical Q-values.
//!
//! ```bash
//! cargo run --release --example checkpoint -- [path]
//! ```

use polecart::autodiff::ParameterSet;
use polecart::env::PartialObservation;
use polecart::harness::train_agent;
use polecart::qnets::{forward, ArchitectureConfig, ObservationWindow, Variant};
use polecart::rl::TrainerConfig;

fn main() -> polecart::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("polecart_dqn.bin").display().to_string());
    let arch = ArchitectureConfig::new(Variant::Dqn);
    let trainer = TrainerConfig {
        episodes: 60,
        ..TrainerConfig::default()
    };
    let (trace, agent) = train_agent(&arch, &trainer, 4, |_| {})?;
    println!("trained {} episodes, best score {}", trace.records.len(), trace.max_score());

    agent.params.save(&path)?;
    let loaded = ParameterSet::load(&path)?;
    println!("{path}: {} tensors, {} values", loaded.len(), loaded.numel());

    let window = ObservationWindow::padded(PartialObservation::new(0.05, -0.01), arch.window_length);
    let before = forward(&arch, &agent.params, &window)?;
    let after = forward(&arch, &loaded, &window)?;
    println!("Q before {:?}, after reload {:?}", before.0, after.0);
    assert_eq!(before, after);
    assert!(loaded.values_equal(&agent.params));
    Ok(())
}
