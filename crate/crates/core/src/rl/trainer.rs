use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{ReplayBuffer, Transition};
use super::schedule::EpsilonSchedule;
use crate::autodiff::{copy_parameters, optimizer_step, OptimizerState, ParameterSet, Tensor};
use crate::env::{observe_partial, Action, CartPole};
use crate::error::{Error, Result};
use crate::qnets::{self, ArchitectureConfig, ObservationWindow, QValues};
use crate::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub gamma: f64,
    /// Global environment steps between target-network refreshes.
    pub target_sync_interval: u64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub learning_rate: f64,
    pub window_length: usize,
    pub episodes: usize,
    /// Replay size at which gradient steps begin.
    pub train_start_size: usize,
    pub epsilon: EpsilonSchedule,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            target_sync_interval: 100,
            batch_size: 32,
            buffer_capacity: 10_000,
            learning_rate: 1e-3,
            window_length: 4,
            episodes: 1500,
            train_start_size: 500,
            epsilon: EpsilonSchedule::default(),
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma must be in [0, 1), got {}", self.gamma)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        let counts = [
            ("target_sync_interval", self.target_sync_interval as usize),
            ("batch_size", self.batch_size),
            ("buffer_capacity", self.buffer_capacity),
            ("window_length", self.window_length),
            ("episodes", self.episodes),
            ("train_start_size", self.train_start_size),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        self.epsilon.validate()
    }
}

/// Epsilon-greedy choice from one uniform draw `u`: explore when
/// `u < epsilon`, picking `Left` for `u < epsilon / 2` and `Right`
/// otherwise; exploit (ties to `Left`) when `u >= epsilon`.
pub fn select_action<R: Rng + ?Sized>(q: &QValues, epsilon: f64, rng: &mut R) -> Action {
    let u: f64 = rng.gen();
    if u < epsilon {
        if u < epsilon / 2.0 {
            Action::Left
        } else {
            Action::Right
        }
    } else {
        q.greedy()
    }
}

/// `r` for terminal transitions, `r + gamma * max_a Q_target(s', a)`
/// otherwise. The result is a `batch x 1` constant.
pub fn td_targets(
    batch: &[&Transition],
    arch: &ArchitectureConfig,
    target_params: &ParameterSet,
    gamma: f64,
) -> Result<Tensor> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let next: Vec<&ObservationWindow> = batch.iter().map(|t| &t.next_window).collect();
    let q_next = qnets::forward_batch(arch, target_params, &next)?;
    let q_next = q_next.data();
    let targets = batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.terminal {
                t.reward
            } else {
                t.reward + gamma * q_next[2 * i].max(q_next[2 * i + 1])
            }
        })
        .collect();
    Tensor::new(batch.len(), 1, targets)
}

/// Mean squared TD error of `Q(s, a)` against [`td_targets`], followed by
/// one optimizer step on `params`. Returns the loss before the update.
pub fn train_step(
    batch: &[&Transition],
    arch: &ArchitectureConfig,
    params: &ParameterSet,
    target_params: &ParameterSet,
    optimizer: &mut OptimizerState,
    config: &TrainerConfig,
) -> Result<f64> {
    if batch.len() != config.batch_size {
        return Err(Error::BatchSize {
            expected: config.batch_size,
            got: batch.len(),
        });
    }
    let loss = td_loss(batch, arch, params, target_params, config.gamma)?;
    params.zero_grad();
    loss.backward()?;
    optimizer_step(params, config.learning_rate, optimizer)?;
    Ok(loss.item())
}

/// The differentiable loss used by [`train_step`].
pub fn td_loss(
    batch: &[&Transition],
    arch: &ArchitectureConfig,
    params: &ParameterSet,
    target_params: &ParameterSet,
    gamma: f64,
) -> Result<Tensor> {
    let targets = td_targets(batch, arch, target_params, gamma)?;
    let windows: Vec<&ObservationWindow> = batch.iter().map(|t| &t.window).collect();
    let actions: Vec<usize> = batch.iter().map(|t| t.action.index()).collect();
    let q = qnets::forward_batch(arch, params, &windows)?;
    q.pick_columns(&actions)?.mse_loss(&targets)
}

/// Copies `params` into `target_params` when `step` is a multiple of
/// `interval`.
pub fn maybe_sync_target(
    step: u64,
    interval: u64,
    params: &ParameterSet,
    target_params: &ParameterSet,
) -> Result<bool> {
    if interval == 0 {
        return Err(Error::InvalidConfig("target sync interval must be positive".into()));
    }
    if step % interval == 0 {
        copy_parameters(params, target_params)?;
        Ok(true)
    } else {
        Ok(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    /// Steps survived (number of +1 rewards).
    pub score: usize,
    /// Mean training loss over the episode, 0 when no update ran.
    pub mean_loss: f64,
    /// Exploration rate after the last step.
    pub epsilon: f64,
}

/// One independent Q-learning run: networks, replay memory, environment
/// and the two PRNG streams it draws from.
pub struct Trainer {
    pub arch: ArchitectureConfig,
    pub config: TrainerConfig,
    pub env: CartPole,
    pub params: ParameterSet,
    pub target_params: ParameterSet,
    pub optimizer: OptimizerState,
    pub buffer: ReplayBuffer,
    /// Environment steps taken across all episodes.
    pub global_step: u64,
    env_rng: StreamRng,
    action_rng: StreamRng,
}

impl Trainer {
    /// `params` is the freshly initialised prediction network; the target
    /// network starts as a copy of it.
    pub fn new(
        arch: ArchitectureConfig,
        config: TrainerConfig,
        params: ParameterSet,
        env_rng: StreamRng,
        action_rng: StreamRng,
    ) -> Result<Self> {
        config.validate()?;
        arch.validate()?;
        if arch.window_length != config.window_length {
            return Err(Error::InvalidConfig(format!(
                "architecture window {} differs from trainer window {}",
                arch.window_length, config.window_length
            )));
        }
        let target_params = params.deep_clone();
        Ok(Self {
            buffer: ReplayBuffer::new(config.buffer_capacity),
            arch,
            config,
            env: CartPole::default(),
            params,
            target_params,
            optimizer: OptimizerState::default(),
            global_step: 0,
            env_rng,
            action_rng,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.value(self.global_step)
    }

    pub fn q_values(&self, window: &ObservationWindow) -> Result<QValues> {
        qnets::forward(&self.arch, &self.params, window)
    }

    /// Plays one episode, storing every transition and taking one gradient
    /// step per environment step once the buffer holds `train_start_size`
    /// transitions.
    pub fn run_episode(&mut self) -> Result<EpisodeStats> {
        let mut state = self.env.reset(&mut self.env_rng);
        let mut window = ObservationWindow::padded(observe_partial(&state), self.config.window_length);
        let mut steps = 0usize;
        let mut score = 0usize;
        let mut loss_sum = 0.0;
        let mut updates = 0usize;

        loop {
            let q = self.q_values(&window)?;
            let action = select_action(&q, self.epsilon(), &mut self.action_rng);
            steps += 1;
            let outcome = self.env.step(&state, action, steps)?;
            let next_window = window.shifted(observe_partial(&outcome.next_state));
            if outcome.reward > 0.0 {
                score += 1;
            }
            self.buffer.push(Transition {
                window,
                action,
                reward: outcome.reward,
                next_window: next_window.clone(),
                terminal: outcome.failed(),
            });
            self.global_step += 1;

            if self.buffer.len() >= self.config.train_start_size {
                let batch = self.buffer.sample(self.config.batch_size, &mut self.action_rng);
                loss_sum += train_step(
                    &batch,
                    &self.arch,
                    &self.params,
                    &self.target_params,
                    &mut self.optimizer,
                    &self.config,
                )?;
                updates += 1;
            }
            maybe_sync_target(
                self.global_step,
                self.config.target_sync_interval,
                &self.params,
                &self.target_params,
            )?;

            if outcome.terminal {
                break;
            }
            state = outcome.next_state;
            window = next_window;
        }

        Ok(EpisodeStats {
            score,
            mean_loss: if updates == 0 { 0.0 } else { loss_sum / updates as f64 },
            epsilon: self.epsilon(),
        })
    }
}
