//! Q-learning on a partially observable CartPole with three interchangeable
//! Q-networks: a feed-forward net over a stacked window (DQN), a GRU over the
//! window (DRQN) and an encoder-only transformer (DTQN).
//!
//! The agent sees only cart position and pole angle. Everything numeric,
//! including reverse-mode differentiation and the Adam optimizer, lives in
//! this crate.
//!
//! ```no_run
//! use polecart::harness::run_training;
//! use polecart::qnets::{ArchitectureConfig, Variant};
//! use polecart::rl::TrainerConfig;
//!
//! let trace = run_training(
//!     &ArchitectureConfig::new(Variant::Drqn),
//!     &TrainerConfig { episodes: 200, ..TrainerConfig::default() },
//!     7,
//! )?;
//! println!("best score {}", trace.max_score());
//! # Ok::<(), polecart::Error>(())
//! ```
//!
//! Runnable programs for each part live in `examples/`.

pub mod autodiff;
pub mod cli;
pub mod env;
mod error;
pub mod harness;
pub mod qnets;
pub mod rl;
pub mod verify;

pub use error::{Error, Result};

/// PRNG used for every seeded stream.
pub type StreamRng = rand_chacha::ChaCha8Rng;

pub fn stream(seed: u64) -> StreamRng {
    use rand::SeedableRng;
    StreamRng::seed_from_u64(seed)
}
