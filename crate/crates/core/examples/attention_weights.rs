//! Prints the self-attention weights of an untrained transformer Q-network
//! on one window, with and without positional encoding.
//!
//! With identical observations and no positional encoding every query sees
//! identical keys, so each row is exactly uniform.
//!
//! ```bash
//! cargo run --release --example attention_weights
//! ```

use polecart::env::PartialObservation;
use polecart::qnets::{dtqn, init_parameters, ArchitectureConfig, ObservationWindow, Variant};
use polecart::stream;

fn show(title: &str, config: &ArchitectureConfig, window: &ObservationWindow) -> polecart::Result<()> {
    let params = init_parameters(config, &mut stream(3))?;
    let (_, weights) = dtqn::encode(config, &params, &[window])?;
    println!("{title}");
    for (l, layer) in weights.iter().enumerate() {
        for (h, head) in layer[0].iter().enumerate() {
            println!("  layer {l} head {h}");
            for row in head.to_vec().chunks(config.window_length) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
                println!("    {}", cells.join("  "));
            }
        }
    }
    Ok(())
}

fn main() -> polecart::Result<()> {
    let config = ArchitectureConfig::new(Variant::Dtqn);
    let moving = ObservationWindow::from_observations(
        [(0.0, 0.01), (0.02, 0.03), (0.05, 0.06), (0.09, 0.10)]
            .into_iter()
            .map(|(x, t)| PartialObservation::new(x, t)),
    );
    show("falling pole, positional encoding on", &config, &moving)?;

    let still = ObservationWindow::padded(PartialObservation::new(0.1, -0.02), 4);
    let plain = ArchitectureConfig {
        positional_encoding: false,
        ..config
    };
    show("repeated observation, positional encoding off", &plain, &still)?;
    Ok(())
}
