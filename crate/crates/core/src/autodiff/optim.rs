use super::params::ParameterSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter in set order.
#[derive(Debug, Clone, Default)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            ..Default::default()
        }
    }
}

/// One Adam update of every parameter, then clears the gradients.
///
/// Fails without touching anything if some parameter has no gradient.
pub fn optimizer_step(params: &ParameterSet, lr: f64, state: &mut OptimizerState) -> Result<()> {
    if let Some((name, _)) = params.iter().find(|(_, t)| t.grad_ref().is_none()) {
        return Err(Error::MissingGradient(name.to_string()));
    }
    if state.first.is_empty() {
        state.first = params.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        state.second = state.first.clone();
    }
    if state.first.len() != params.len() {
        return Err(Error::ParameterMismatch(format!(
            "optimizer tracks {} tensors, got {}",
            state.first.len(),
            params.len()
        )));
    }

    state.step += 1;
    let AdamConfig { beta1, beta2, eps } = state.config;
    let t = state.step as i32;
    let bias1 = 1.0 - beta1.powi(t);
    let bias2 = 1.0 - beta2.powi(t);

    for (((_, param), m), v) in params.iter().zip(&mut state.first).zip(&mut state.second) {
        {
            let grad = param.grad_ref();
            let grad = grad.as_ref().expect("checked above");
            let mut data = param.data_mut();
            for i in 0..data.len() {
                let g = grad[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        param.zero_grad();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn single(value: f64) -> ParameterSet {
        let mut p = ParameterSet::new();
        p.insert("w", Tensor::param(1, 1, vec![value]).unwrap()).unwrap();
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let p = single(1.25);
        p.get("w").unwrap().scale(0.0).sum().backward().unwrap();
        optimizer_step(&p, 0.1, &mut OptimizerState::default()).unwrap();
        assert_eq!(p.get("w").unwrap().item(), 1.25);
    }

    #[test]
    fn one_step_by_hand() {
        // d(0.25 w^2)/dw at w = 1 is 0.5
        // m = 0.05, v = 0.00025, m_hat = 0.5, v_hat = 0.25
        let p = single(1.0);
        let w = p.get("w").unwrap();
        w.mul(w).unwrap().scale(0.25).sum().backward().unwrap();
        optimizer_step(&p, 0.1, &mut OptimizerState::default()).unwrap();
        let expected = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
        assert!((w.item() - expected).abs() < 1e-15);
        assert!(w.grad().is_none());
    }

    #[test]
    fn missing_gradient_is_error() {
        let p = single(1.0);
        assert!(matches!(
            optimizer_step(&p, 0.1, &mut OptimizerState::default()),
            Err(Error::MissingGradient(_))
        ));
    }

    #[test]
    fn deterministic() {
        let run = || {
            let p = single(0.3);
            let mut st = OptimizerState::default();
            for _ in 0..5 {
                let w = p.get("w").unwrap();
                w.mul(w).unwrap().sum().backward().unwrap();
                optimizer_step(&p, 0.01, &mut st).unwrap();
            }
            p.get("w").unwrap().item().to_bits()
        };
        assert_eq!(run(), run());
    }
}
