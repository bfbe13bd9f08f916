//! Classic CartPole dynamics with a position/angle-only observation.
//!
//! The equations of motion are the frictionless cart-pole of the classic
//! control literature, integrated with explicit Euler: positions advance with
//! the velocities from the start of the step, velocities with the
//! accelerations computed there.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl FullState {
    pub const ZERO: FullState = FullState {
        x: 0.0,
        x_dot: 0.0,
        theta: 0.0,
        theta_dot: 0.0,
    };

    pub fn new(x: f64, x_dot: f64, theta: f64, theta_dot: f64) -> Self {
        Self {
            x,
            x_dot,
            theta,
            theta_dot,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Sign flip of every field; the dynamics commute with this paired with
    /// [`Action::mirror`].
    pub fn mirror(self) -> Self {
        Self::new(-self.x, -self.x_dot, -self.theta, -self.theta_dot)
    }
}

/// What the agent is allowed to see: cart position and pole angle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PartialObservation {
    pub x: f64,
    pub theta: f64,
}

impl PartialObservation {
    pub fn new(x: f64, theta: f64) -> Self {
        Self { x, theta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Left, Action::Right];

    pub fn index(self) -> usize {
        match self {
            Action::Left => 0,
            Action::Right => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn mirror(self) -> Action {
        match self {
            Action::Left => Action::Right,
            Action::Right => Action::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: FullState,
    /// +1 while the pole stays up, -1 on the step it falls.
    pub reward: f64,
    /// Episode is over, either by failure or by hitting the step cap.
    pub terminal: bool,
    /// The episode ended only because of the step cap.
    pub truncated: bool,
}

impl StepOutcome {
    /// True when the episode ended through a genuine failure (angle or
    /// position out of bounds).
    pub fn failed(&self) -> bool {
        self.terminal && !self.truncated
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartPole {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Half the pole length.
    pub half_length: f64,
    pub force: f64,
    pub dt: f64,
    pub theta_threshold: f64,
    pub x_threshold: f64,
    pub max_steps: usize,
    pub init_range: f64,
}

impl Default for CartPole {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            force: 10.0,
            dt: 0.02,
            theta_threshold: 12.0 * 2.0 * std::f64::consts::PI / 360.0,
            x_threshold: 2.4,
            max_steps: 500,
            init_range: 0.05,
        }
    }
}

impl CartPole {
    /// Draws the four fields, in order x, x_dot, theta, theta_dot, uniformly
    /// from `[-init_range, init_range)`. Consumes exactly four draws.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> FullState {
        let r = self.init_range;
        let x = rng.gen_range(-r..r);
        let x_dot = rng.gen_range(-r..r);
        let theta = rng.gen_range(-r..r);
        let theta_dot = rng.gen_range(-r..r);
        FullState::new(x, x_dot, theta, theta_dot)
    }

    /// Advances one time step. `step_number` is the 1-based index of this
    /// step within the episode; reaching `max_steps` truncates.
    pub fn step(&self, state: &FullState, action: Action, step_number: usize) -> Result<StepOutcome> {
        if !state.is_finite() {
            return Err(Error::NonFiniteState(state.to_array()));
        }
        let next_state = self.integrate(state, action);
        let failed = next_state.x.abs() > self.x_threshold
            || next_state.theta.abs() > self.theta_threshold
            || !next_state.is_finite();
        let truncated = !failed && step_number >= self.max_steps;
        Ok(StepOutcome {
            next_state,
            reward: if failed { -1.0 } else { 1.0 },
            terminal: failed || truncated,
            truncated,
        })
    }

    fn integrate(&self, s: &FullState, action: Action) -> FullState {
        let force = match action {
            Action::Left => -self.force,
            Action::Right => self.force,
        };
        let total_mass = self.cart_mass + self.pole_mass;
        let pole_mass_length = self.pole_mass * self.half_length;
        let (sin, cos) = (s.theta.sin(), s.theta.cos());

        let temp = (force + pole_mass_length * s.theta_dot * s.theta_dot * sin) / total_mass;
        let theta_acc = (self.gravity * sin - cos * temp)
            / (self.half_length * (4.0 / 3.0 - self.pole_mass * cos * cos / total_mass));
        let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;

        FullState {
            x: s.x + self.dt * s.x_dot,
            x_dot: s.x_dot + self.dt * x_acc,
            theta: s.theta + self.dt * s.theta_dot,
            theta_dot: s.theta_dot + self.dt * theta_acc,
        }
    }
}

pub fn observe_partial(state: &FullState) -> PartialObservation {
    PartialObservation {
        x: state.x,
        theta: state.theta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reset_is_seeded_and_bounded() {
        let env = CartPole::default();
        let a = env.reset(&mut ChaCha8Rng::seed_from_u64(0));
        let b = env.reset(&mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(a, b);
        assert!(a.to_array().iter().all(|v| v.abs() <= 0.05));
    }

    #[test]
    fn reset_consumes_four_draws() {
        let env = CartPole::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        env.reset(&mut rng);
        let mut reference = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..4 {
            reference.gen_range(-0.05..0.05);
        }
        assert_eq!(rng.gen::<u64>(), reference.gen::<u64>());
    }

    #[test]
    fn reset_mean_is_centered() {
        let env = CartPole::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut sums = [0.0; 4];
        let n = 10_000;
        for _ in 0..n {
            let s = env.reset(&mut rng).to_array();
            for (acc, v) in sums.iter_mut().zip(s) {
                *acc += v;
            }
        }
        for sum in sums {
            assert!((sum / n as f64).abs() < 0.005);
        }
    }

    #[test]
    fn first_step_from_rest_tilts_pole() {
        let env = CartPole::default();
        for action in Action::ALL {
            let one = env.step(&FullState::ZERO, action, 1).unwrap();
            // explicit Euler: angle moves one step after the angular velocity
            assert_eq!(one.next_state.theta, 0.0);
            assert!(one.next_state.theta_dot.abs() > 0.0);
            let two = env.step(&one.next_state, action, 2).unwrap();
            assert!(two.next_state.theta.abs() > 0.0);
        }
        // hand-computed: x_acc = 9.756..., theta_acc = -14.634...
        let s = env.step(&FullState::ZERO, Action::Right, 1).unwrap().next_state;
        assert!((s.x_dot - 0.1951219512195122).abs() < 1e-15);
        assert!((s.theta_dot + 0.2926829268292683).abs() < 1e-15);
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let env = CartPole::default();
        let s = FullState::new(f64::NAN, 0.0, 0.0, 0.0);
        assert!(matches!(env.step(&s, Action::Left, 1), Err(Error::NonFiniteState(_))));
    }

    #[test]
    fn alternating_actions_from_origin_survive_ten_steps() {
        let env = CartPole::default();
        let mut s = FullState::ZERO;
        for i in 0..10 {
            let action = if i % 2 == 0 { Action::Left } else { Action::Right };
            let out = env.step(&s, action, i + 1).unwrap();
            assert!(!out.terminal);
            assert_eq!(out.reward, 1.0);
            s = out.next_state;
        }
    }

    #[test]
    fn failure_gives_negative_reward() {
        let env = CartPole::default();
        let s = FullState::new(0.0, 0.0, 0.5, 0.0);
        let out = env.step(&s, Action::Left, 1).unwrap();
        assert!(out.terminal && out.failed());
        assert_eq!(out.reward, -1.0);
        let s = FullState::new(2.39, 1.0, 0.0, 0.0);
        assert!(env.step(&s, Action::Right, 1).unwrap().failed());
    }

    #[test]
    fn step_cap_truncates_with_positive_reward() {
        let env = CartPole::default();
        let out = env.step(&FullState::ZERO, Action::Left, 500).unwrap();
        assert!(out.terminal && out.truncated && !out.failed());
        assert_eq!(out.reward, 1.0);
        assert!(!env.step(&FullState::ZERO, Action::Left, 499).unwrap().terminal);
    }

    #[test]
    fn partial_observation_is_projection() {
        let s = FullState::new(1.0, 2.0, 0.1, 3.0);
        assert_eq!(observe_partial(&s), PartialObservation::new(1.0, 0.1));
        assert_eq!(observe_partial(&FullState::ZERO), PartialObservation::default());
        assert_eq!(observe_partial(&s.mirror()), PartialObservation::new(-1.0, -0.1));
    }
}
