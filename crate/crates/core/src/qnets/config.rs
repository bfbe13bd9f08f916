use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Feed-forward network over the flattened window.
    Dqn,
    /// GRU over the window, read out at the last step.
    Drqn,
    /// Encoder-only transformer over the window.
    Dtqn,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Dqn, Variant::Drqn, Variant::Dtqn];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Dqn => "dqn",
            Variant::Drqn => "drqn",
            Variant::Dtqn => "dtqn",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dqn" => Ok(Variant::Dqn),
            "drqn" => Ok(Variant::Drqn),
            "dtqn" => Ok(Variant::Dtqn),
            other => Err(Error::Invalid(format!(
                "unknown algorithm `{other}` (expected dqn, drqn or dtqn)"
            ))),
        }
    }
}

/// How the transformer turns the per-position representations into one
/// vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    FinalPosition,
    MeanPool,
}

impl FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final" | "final_position" => Ok(Readout::FinalPosition),
            "mean" | "mean_pool" => Ok(Readout::MeanPool),
            other => Err(Error::Invalid(format!("unknown readout `{other}` (expected final or mean)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub variant: Variant,
    /// Observations per window.
    pub window_length: usize,
    /// DQN layer width.
    pub hidden_dim: usize,
    /// Width each observation is projected to before entering the GRU.
    pub gru_input_dim: usize,
    pub gru_hidden_dim: usize,
    pub model_dim: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub feedforward_dim: usize,
    pub positional_encoding: bool,
    pub readout: Readout,
    pub layer_norm_eps: f64,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Drqn,
            window_length: 4,
            hidden_dim: 64,
            gru_input_dim: 16,
            gru_hidden_dim: 64,
            model_dim: 32,
            n_heads: 2,
            n_layers: 2,
            feedforward_dim: 64,
            positional_encoding: true,
            readout: Readout::FinalPosition,
            layer_norm_eps: 1e-5,
        }
    }
}

impl ArchitectureConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    /// Every dimension set to `dim` (heads kept at 2 when `dim` allows),
    /// for gradient checks and tests.
    pub fn tiny(variant: Variant, dim: usize) -> Self {
        Self {
            variant,
            hidden_dim: dim,
            gru_input_dim: dim,
            gru_hidden_dim: dim,
            model_dim: dim,
            n_heads: if dim % 2 == 0 { 2 } else { 1 },
            n_layers: 1,
            feedforward_dim: dim,
            ..Self::default()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("window_length", self.window_length),
            ("hidden_dim", self.hidden_dim),
            ("gru_input_dim", self.gru_input_dim),
            ("gru_hidden_dim", self.gru_hidden_dim),
            ("model_dim", self.model_dim),
            ("n_heads", self.n_heads),
            ("n_layers", self.n_layers),
            ("feedforward_dim", self.feedforward_dim),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArchitecture(format!("{name} must be positive")));
        }
        if self.model_dim % self.n_heads != 0 {
            return Err(Error::InvalidArchitecture(format!(
                "model_dim {} is not divisible by n_heads {}",
                self.model_dim, self.n_heads
            )));
        }
        if !(self.layer_norm_eps > 0.0) {
            return Err(Error::InvalidArchitecture("layer_norm_eps must be positive".into()));
        }
        Ok(())
    }
}
