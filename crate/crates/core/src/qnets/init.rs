//! Parameter layouts and their initialisation.
//!
//! Weights are stored `fan_in x fan_out` and drawn from
//! `U(-sqrt(1/fan_in), sqrt(1/fan_in))` in row-major order; biases start at
//! zero and layer-norm gains at one. Tensors are drawn in the order they are
//! listed by [`layout`], which is also the iteration order of the resulting
//! [`ParameterSet`].

use rand::Rng;

use super::config::{ArchitectureConfig, Variant};
use crate::autodiff::{ParameterSet, Tensor};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Uniform,
    Zeros,
    Ones,
}

/// `(name, rows, cols, init)` for every tensor of the architecture.
pub fn layout(config: &ArchitectureConfig) -> Vec<(String, usize, usize, Init)> {
    let mut out = Vec::new();
    let linear = |out: &mut Vec<_>, name: &str, fan_in: usize, fan_out: usize| {
        out.push((format!("{name}.weight"), fan_in, fan_out, Init::Uniform));
        out.push((format!("{name}.bias"), 1, fan_out, Init::Zeros));
    };
    let w = config.window_length;
    match config.variant {
        Variant::Dqn => {
            linear(&mut out, "fc1", 2 * w, config.hidden_dim);
            linear(&mut out, "fc2", config.hidden_dim, config.hidden_dim);
            linear(&mut out, "out", config.hidden_dim, 2);
        }
        Variant::Drqn => {
            let (input, hidden) = (config.gru_input_dim, config.gru_hidden_dim);
            linear(&mut out, "proj", 2, input);
            for gate in ["r", "z", "n"] {
                out.push((format!("gru.w_i{gate}"), input, hidden, Init::Uniform));
                out.push((format!("gru.b_i{gate}"), 1, hidden, Init::Zeros));
            }
            for gate in ["r", "z", "n"] {
                out.push((format!("gru.w_h{gate}"), hidden, hidden, Init::Uniform));
                out.push((format!("gru.b_h{gate}"), 1, hidden, Init::Zeros));
            }
            linear(&mut out, "out", hidden, 2);
        }
        Variant::Dtqn => {
            let d = config.model_dim;
            let hd = config.head_dim();
            linear(&mut out, "embed", 2, d);
            for l in 0..config.n_layers {
                for h in 0..config.n_heads {
                    for proj in ["query", "key", "value"] {
                        out.push((format!("layer{l}.attn.head{h}.{proj}"), d, hd, Init::Uniform));
                    }
                }
                linear(&mut out, &format!("layer{l}.attn.out"), d, d);
                out.push((format!("layer{l}.norm1.gain"), 1, d, Init::Ones));
                out.push((format!("layer{l}.norm1.bias"), 1, d, Init::Zeros));
                linear(&mut out, &format!("layer{l}.ff1"), d, config.feedforward_dim);
                linear(&mut out, &format!("layer{l}.ff2"), config.feedforward_dim, d);
                out.push((format!("layer{l}.norm2.gain"), 1, d, Init::Ones));
                out.push((format!("layer{l}.norm2.bias"), 1, d, Init::Zeros));
            }
            linear(&mut out, "out", d, 2);
        }
    }
    out
}

pub fn init_parameters<R: Rng + ?Sized>(config: &ArchitectureConfig, rng: &mut R) -> Result<ParameterSet> {
    config.validate()?;
    let mut params = ParameterSet::new();
    for (name, rows, cols, init) in layout(config) {
        let data = match init {
            Init::Uniform => {
                let bound = (1.0 / rows as f64).sqrt();
                (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect()
            }
            Init::Zeros => vec![0.0; rows * cols],
            Init::Ones => vec![1.0; rows * cols],
        };
        params.insert(name, Tensor::param(rows, cols, data)?)?;
    }
    Ok(params)
}
