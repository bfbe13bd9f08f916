//! Q-value approximators mapping an observation window to one value per
//! action.

pub mod attention;
mod config;
pub mod dqn;
pub mod drqn;
pub mod dtqn;
mod init;
mod window;

pub use attention::{multi_head_self_attention, AttentionOutput};
pub use config::{ArchitectureConfig, Readout, Variant};
pub use init::{init_parameters, layout, Init};
pub use window::ObservationWindow;

use crate::autodiff::{ParameterSet, Tensor};
use crate::env::Action;
use crate::error::{Error, Result};

/// One estimate per action, indexed by [`Action::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QValues(pub [f64; 2]);

impl QValues {
    pub fn get(&self, action: Action) -> f64 {
        self.0[action.index()]
    }

    /// Highest-valued action; ties go to `Left`.
    pub fn greedy(&self) -> Action {
        if self.0[1] > self.0[0] {
            Action::Right
        } else {
            Action::Left
        }
    }

    pub fn max(&self) -> f64 {
        self.0[0].max(self.0[1])
    }
}

pub(crate) fn linear(x: &Tensor, params: &ParameterSet, name: &str) -> Result<Tensor> {
    x.matmul(params.get(&format!("{name}.weight"))?)?
        .add(params.get(&format!("{name}.bias"))?)
}

pub(crate) fn check_windows(config: &ArchitectureConfig, windows: &[&ObservationWindow]) -> Result<()> {
    if windows.is_empty() {
        return Err(Error::EmptyBatch);
    }
    match windows.iter().find(|w| w.len() != config.window_length) {
        Some(bad) => Err(Error::WindowLength {
            expected: config.window_length,
            got: bad.len(),
        }),
        None => Ok(()),
    }
}

/// Differentiable Q-values for a batch of windows, `batch x 2`.
pub fn forward_batch(
    config: &ArchitectureConfig,
    params: &ParameterSet,
    windows: &[&ObservationWindow],
) -> Result<Tensor> {
    match config.variant {
        Variant::Dqn => dqn::forward(config, params, windows),
        Variant::Drqn => drqn::forward(config, params, windows),
        Variant::Dtqn => dtqn::forward(config, params, windows),
    }
}

/// Q-values of a single window under whichever architecture `config` names.
pub fn forward(config: &ArchitectureConfig, params: &ParameterSet, window: &ObservationWindow) -> Result<QValues> {
    let out = forward_batch(config, params, &[window])?;
    let d = out.data();
    Ok(QValues([d[0], d[1]]))
}

fn forward_as(
    variant: Variant,
    config: &ArchitectureConfig,
    params: &ParameterSet,
    window: &ObservationWindow,
) -> Result<QValues> {
    if config.variant != variant {
        return Err(Error::InvalidArchitecture(format!(
            "config is for {}, not {variant}",
            config.variant
        )));
    }
    forward(config, params, window)
}

pub fn forward_dqn(config: &ArchitectureConfig, params: &ParameterSet, window: &ObservationWindow) -> Result<QValues> {
    forward_as(Variant::Dqn, config, params, window)
}

pub fn forward_drqn(config: &ArchitectureConfig, params: &ParameterSet, window: &ObservationWindow) -> Result<QValues> {
    forward_as(Variant::Drqn, config, params, window)
}

pub fn forward_dtqn(config: &ArchitectureConfig, params: &ParameterSet, window: &ObservationWindow) -> Result<QValues> {
    forward_as(Variant::Dtqn, config, params, window)
}
