use std::collections::VecDeque;

use crate::env::PartialObservation;

/// The last `w` observations, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationWindow {
    observations: VecDeque<PartialObservation>,
}

impl ObservationWindow {
    /// Window at the start of an episode: `first` repeated `length` times.
    pub fn padded(first: PartialObservation, length: usize) -> Self {
        assert!(length > 0, "window length must be positive");
        Self {
            observations: std::iter::repeat(first).take(length).collect(),
        }
    }

    pub fn from_observations(observations: impl IntoIterator<Item = PartialObservation>) -> Self {
        Self {
            observations: observations.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn latest(&self) -> PartialObservation {
        *self.observations.back().expect("non-empty window")
    }

    pub fn iter(&self) -> impl Iterator<Item = &PartialObservation> {
        self.observations.iter()
    }

    /// Drops the oldest observation and appends `obs`.
    pub fn shifted(&self, obs: PartialObservation) -> Self {
        let mut next = self.clone();
        next.observations.pop_front();
        next.observations.push_back(obs);
        next
    }

    /// `[x_0, theta_0, x_1, theta_1, ...]`.
    pub fn flatten(&self) -> Vec<f64> {
        self.observations.iter().flat_map(|o| [o.x, o.theta]).collect()
    }
}
