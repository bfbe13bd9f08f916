//! Central finite-difference verification of analytic gradients.

use super::tensor::Tensor;
use crate::error::Result;

pub const DEFAULT_STEP: f64 = 1e-5;

/// `|a - f| / max(1, |a|, |f|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(input index, element index)` of the worst entry.
    pub worst: (usize, usize),
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

/// Compares the gradient that `backward` leaves on each input against
/// `(f(x + h) - f(x - h)) / 2h`, element by element.
///
/// `loss` must rebuild the graph from the current input values on every
/// call and return a 1x1 tensor. Inputs are restored afterwards and their
/// gradients cleared.
pub fn check_gradients<F>(inputs: &[Tensor], h: f64, loss: F) -> Result<GradCheckReport>
where
    F: Fn() -> Result<Tensor>,
{
    inputs.iter().for_each(Tensor::zero_grad);
    loss()?.backward()?;
    let analytic: Vec<Vec<f64>> = inputs
        .iter()
        .map(|t| t.grad().unwrap_or_else(|| vec![0.0; t.len()]))
        .collect();
    inputs.iter().for_each(Tensor::zero_grad);

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: (0, 0),
        checked: 0,
    };
    for (i, input) in inputs.iter().enumerate() {
        for j in 0..input.len() {
            let original = input.data()[j];
            input.data_mut()[j] = original + h;
            let plus = loss()?.item();
            input.data_mut()[j] = original - h;
            let minus = loss()?.item();
            input.data_mut()[j] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(analytic[i][j], numeric);
            report.checked += 1;
            if err > report.max_relative_error || err.is_nan() {
                report.max_relative_error = err;
                report.worst = (i, j);
            }
        }
    }
    Ok(report)
}

/// Reduces a tensor of any shape to a scalar with fixed weights, so that
/// every output element contributes distinctly to the checked gradient.
pub fn weighted_sum(output: &Tensor, weights: &[f64]) -> Result<Tensor> {
    let w = Tensor::new(output.rows(), output.cols(), weights[..output.len()].to_vec())?;
    Ok(output.mul(&w)?.sum())
}
