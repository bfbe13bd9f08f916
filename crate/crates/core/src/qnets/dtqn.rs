use super::attention::multi_head_self_attention;
use super::config::{ArchitectureConfig, Readout};
use super::{check_windows, linear, ObservationWindow};
use crate::autodiff::{ParameterSet, Tensor};
use crate::error::Result;

/// Sinusoidal position table, `len x dim`:
/// `PE[p, 2i] = sin(p / 10000^(2i/dim))`, `PE[p, 2i+1] = cos(...)`.
pub fn positional_encoding(len: usize, dim: usize) -> Vec<f64> {
    let mut table = vec![0.0; len * dim];
    for pos in 0..len {
        for i in 0..dim {
            let pair = (i / 2) as f64 * 2.0;
            let angle = pos as f64 / 10000f64.powf(pair / dim as f64);
            table[pos * dim + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    table
}

/// Per-position states after the embedding and every encoder block, plus
/// the attention weights of each layer (`[layer][sequence][head]`).
pub fn encode(
    config: &ArchitectureConfig,
    params: &ParameterSet,
    windows: &[&ObservationWindow],
) -> Result<(Tensor, Vec<Vec<Vec<Tensor>>>)> {
    let w = config.window_length;
    let d = config.model_dim;
    let tokens: Vec<f64> = windows.iter().flat_map(|win| win.flatten()).collect();
    let x = Tensor::new(windows.len() * w, 2, tokens)?;
    let mut h = linear(&x, params, "embed")?;
    if config.positional_encoding {
        let pe = positional_encoding(w, d);
        let tiled: Vec<f64> = pe.iter().copied().cycle().take(windows.len() * w * d).collect();
        h = h.add(&Tensor::new(windows.len() * w, d, tiled)?)?;
    }

    let mut all_weights = Vec::with_capacity(config.n_layers);
    for l in 0..config.n_layers {
        let norm = |t: &Tensor, which: &str| -> Result<Tensor> {
            t.layer_norm(
                params.get(&format!("layer{l}.{which}.gain"))?,
                params.get(&format!("layer{l}.{which}.bias"))?,
                config.layer_norm_eps,
            )
        };
        let attn = multi_head_self_attention(config, params, l, &h, w)?;
        all_weights.push(attn.weights);
        let h1 = norm(&h.add(&attn.output)?, "norm1")?;
        let ff = linear(&h1, params, &format!("layer{l}.ff1"))?.relu();
        let ff = linear(&ff, params, &format!("layer{l}.ff2"))?;
        h = norm(&h1.add(&ff)?, "norm2")?;
    }
    Ok((h, all_weights))
}

/// Returns `batch x 2`.
pub fn forward(config: &ArchitectureConfig, params: &ParameterSet, windows: &[&ObservationWindow]) -> Result<Tensor> {
    check_windows(config, windows)?;
    config.validate()?;
    let w = config.window_length;
    let (h, _) = encode(config, params, windows)?;
    let pooled = match config.readout {
        Readout::FinalPosition => {
            let last: Vec<usize> = (0..windows.len()).map(|b| b * w + w - 1).collect();
            h.select_rows(&last)?
        }
        Readout::MeanPool => {
            let means = (0..windows.len())
                .map(|b| Ok(h.slice_rows(b * w, w)?.mean_rows()))
                .collect::<Result<Vec<_>>>()?;
            Tensor::concat_rows(&means)?
        }
    };
    linear(&pooled, params, "out")
}
