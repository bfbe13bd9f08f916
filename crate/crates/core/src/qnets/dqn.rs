use super::config::ArchitectureConfig;
use super::{check_windows, linear, ObservationWindow};
use crate::autodiff::{ParameterSet, Tensor};
use crate::error::Result;

/// Flattened windows through `2w -> hidden -> hidden -> 2` with ReLU
/// between layers. Returns `batch x 2`.
pub fn forward(config: &ArchitectureConfig, params: &ParameterSet, windows: &[&ObservationWindow]) -> Result<Tensor> {
    check_windows(config, windows)?;
    let w = config.window_length;
    let input: Vec<f64> = windows.iter().flat_map(|win| win.flatten()).collect();
    let x = Tensor::new(windows.len(), 2 * w, input)?;
    let h = linear(&x, params, "fc1")?.relu();
    let h = linear(&h, params, "fc2")?.relu();
    linear(&h, params, "out")
}
