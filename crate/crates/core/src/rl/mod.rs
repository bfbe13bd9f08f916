//! Q-learning with experience replay and a periodically synced target
//! network.

mod buffer;
mod schedule;
mod trainer;

pub use buffer::{ReplayBuffer, Transition};
pub use schedule::EpsilonSchedule;
pub use trainer::{
    maybe_sync_target, select_action, td_loss, td_targets, train_step, EpisodeStats, Trainer,
    TrainerConfig,
};

use rand::Rng;

use crate::env::{Action, CartPole};
use crate::error::Result;

/// Scores of a policy that picks Left/Right with equal probability.
pub fn random_policy_scores<R: Rng + ?Sized>(env: &CartPole, episodes: usize, rng: &mut R) -> Result<Vec<usize>> {
    let mut scores = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut state = env.reset(rng);
        let mut score = 0;
        for step in 1.. {
            let action = if rng.gen::<bool>() { Action::Right } else { Action::Left };
            let out = env.step(&state, action, step)?;
            if out.reward > 0.0 {
                score += 1;
            }
            if out.terminal {
                break;
            }
            state = out.next_state;
        }
        scores.push(score);
    }
    Ok(scores)
}
