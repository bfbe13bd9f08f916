use super::config::ArchitectureConfig;
use super::{check_windows, linear, ObservationWindow};
use crate::autodiff::{ParameterSet, Tensor};
use crate::error::Result;

/// One GRU step on a batch of projected inputs `x` (`batch x input`) and
/// hidden states `h` (`batch x hidden`):
///
/// ```text
/// r  = sigmoid(x W_ir + b_ir + h W_hr + b_hr)
/// z  = sigmoid(x W_iz + b_iz + h W_hz + b_hz)
/// n  = tanh(x W_in + b_in + r * (h W_hn + b_hn))
/// h' = (1 - z) * n + z * h
/// ```
///
/// `h = None` stands for the all-zero initial state.
pub fn gru_cell(params: &ParameterSet, x: &Tensor, h: Option<&Tensor>) -> Result<Tensor> {
    let gate = |g: &str| -> Result<(Tensor, Tensor)> {
        let input = x
            .matmul(params.get(&format!("gru.w_i{g}"))?)?
            .add(params.get(&format!("gru.b_i{g}"))?)?;
        let bias = params.get(&format!("gru.b_h{g}"))?;
        let hidden = match h {
            Some(h) => h.matmul(params.get(&format!("gru.w_h{g}"))?)?.add(bias)?,
            None => bias.clone(),
        };
        Ok((input, hidden))
    };
    let (ir, hr) = gate("r")?;
    let r = ir.add(&hr)?.sigmoid();
    let (iz, hz) = gate("z")?;
    let z = iz.add(&hz)?.sigmoid();
    let (inn, hn) = gate("n")?;
    let n = inn.add(&r.mul(&hn)?)?.tanh();
    let keep_new = z.one_minus().mul(&n)?;
    match h {
        Some(h) => keep_new.add(&z.mul(h)?),
        None => Ok(keep_new),
    }
}

/// Input projection of step `t` of every window, `batch x gru_input_dim`.
pub fn project_step(params: &ParameterSet, windows: &[&ObservationWindow], t: usize) -> Result<Tensor> {
    let obs: Vec<f64> = windows
        .iter()
        .flat_map(|w| {
            let o = w.iter().nth(t).expect("step within window");
            [o.x, o.theta]
        })
        .collect();
    linear(&Tensor::new(windows.len(), 2, obs)?, params, "proj")
}

/// Unrolls the GRU from a zero state over every step of the windows and
/// returns the final hidden state. Windows may have any (common) length.
pub fn final_hidden(params: &ParameterSet, windows: &[&ObservationWindow]) -> Result<Tensor> {
    let steps = windows[0].len();
    let mut h: Option<Tensor> = None;
    for t in 0..steps {
        let x = project_step(params, windows, t)?;
        h = Some(gru_cell(params, &x, h.as_ref())?);
    }
    Ok(h.expect("non-empty window"))
}

/// Returns `batch x 2`.
pub fn forward(config: &ArchitectureConfig, params: &ParameterSet, windows: &[&ObservationWindow]) -> Result<Tensor> {
    check_windows(config, windows)?;
    let h = final_hidden(params, windows)?;
    linear(&h, params, "out")
}
