use super::config::ArchitectureConfig;
use crate::autodiff::{ParameterSet, Tensor};
use crate::error::{Error, Result};

pub struct AttentionOutput {
    /// `(batch * seq_len) x model_dim`.
    pub output: Tensor,
    /// `seq_len x seq_len` weights, indexed `[sequence][head]`.
    pub weights: Vec<Vec<Tensor>>,
}

/// Unmasked multi-head self-attention over `x`, which stacks
/// `x.rows() / seq_len` sequences of `seq_len` rows each.
///
/// Head `h` uses `layer.attn.head{h}.{query,key,value}` (`model_dim x
/// head_dim`); head outputs are concatenated and passed through
/// `layer.attn.out`.
pub fn multi_head_self_attention(
    config: &ArchitectureConfig,
    params: &ParameterSet,
    layer: usize,
    x: &Tensor,
    seq_len: usize,
) -> Result<AttentionOutput> {
    if x.cols() != config.model_dim || seq_len == 0 || x.rows() % seq_len != 0 {
        return Err(Error::ShapeMismatch {
            op: "self_attention",
            lhs: x.shape().to_vec(),
            rhs: vec![seq_len, config.model_dim],
        });
    }
    if config.model_dim % config.n_heads != 0 {
        return Err(Error::InvalidArchitecture(format!(
            "model_dim {} is not divisible by n_heads {}",
            config.model_dim, config.n_heads
        )));
    }
    let batch = x.rows() / seq_len;
    let scale = 1.0 / (config.head_dim() as f64).sqrt();
    let mut weights = vec![Vec::with_capacity(config.n_heads); batch];
    let mut heads = Vec::with_capacity(config.n_heads);
    for h in 0..config.n_heads {
        let proj = |name: &str| -> Result<Tensor> {
            x.matmul(params.get(&format!("layer{layer}.attn.head{h}.{name}"))?)
        };
        let (q, k, v) = (proj("query")?, proj("key")?, proj("value")?);
        let mut per_seq = Vec::with_capacity(batch);
        for (b, seq_weights) in weights.iter_mut().enumerate() {
            let start = b * seq_len;
            let qb = q.slice_rows(start, seq_len)?;
            let kb = k.slice_rows(start, seq_len)?;
            let vb = v.slice_rows(start, seq_len)?;
            let attn = qb.matmul(&kb.transpose())?.scale(scale).softmax_rows();
            per_seq.push(attn.matmul(&vb)?);
            seq_weights.push(attn);
        }
        heads.push(if batch == 1 {
            per_seq.pop().expect("one sequence")
        } else {
            Tensor::concat_rows(&per_seq)?
        });
    }
    let concat = if heads.len() == 1 {
        heads.pop().expect("one head")
    } else {
        Tensor::concat_cols(&heads)?
    };
    let output = super::linear(&concat, params, &format!("layer{layer}.attn.out"))?;
    Ok(AttentionOutput { output, weights })
}
