//! Differentiable primitives.
//!
//! Everything is a 2-D matrix. Binary elementwise ops accept either equal
//! shapes or a `1 x n` right-hand side that is broadcast over the rows of an
//! `m x n` left-hand side.

use super::tensor::{GradSink, Tensor};
use crate::error::{Error, Result};

pub(super) enum Op {
    Leaf,
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Scale(Tensor, f64),
    AddScalar(Tensor),
    MatMul(Tensor, Tensor),
    Transpose(Tensor),
    Tanh(Tensor),
    Sigmoid(Tensor),
    Relu(Tensor),
    SoftmaxRows(Tensor),
    LayerNorm {
        x: Tensor,
        gain: Tensor,
        bias: Tensor,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    Mse(Tensor, Tensor),
    Sum(Tensor),
    MeanRows(Tensor),
    SelectRows(Tensor, Vec<usize>),
    PickColumns(Tensor, Vec<usize>),
    ConcatRows(Vec<Tensor>),
    ConcatCols(Vec<Tensor>),
}

impl Op {
    pub(super) fn parents(&self) -> Vec<&Tensor> {
        match self {
            Op::Leaf => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) | Op::Mse(a, b) => {
                vec![a, b]
            }
            Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Transpose(a)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Relu(a)
            | Op::SoftmaxRows(a)
            | Op::Sum(a)
            | Op::MeanRows(a)
            | Op::SelectRows(a, _)
            | Op::PickColumns(a, _) => vec![a],
            Op::LayerNorm { x, gain, bias, .. } => vec![x, gain, bias],
            Op::ConcatRows(ts) | Op::ConcatCols(ts) => ts.iter().collect(),
        }
    }

    /// Propagates `upstream` (the gradient w.r.t. `out`) into the parents.
    pub(super) fn backward(&self, out: &Tensor, upstream: &[f64], sink: &mut GradSink<'_>) {
        match self {
            Op::Leaf => {}
            Op::Add(a, b) => {
                sink.accumulate(a, |g| add_into(g, upstream));
                sink.accumulate(b, |g| reduce_broadcast(g, upstream, b.cols()));
            }
            Op::Sub(a, b) => {
                sink.accumulate(a, |g| add_into(g, upstream));
                sink.accumulate(b, |g| {
                    let neg: Vec<f64> = upstream.iter().map(|u| -u).collect();
                    reduce_broadcast(g, &neg, b.cols());
                });
            }
            Op::Mul(a, b) => {
                let bd = b.data();
                let ad = a.data();
                let n = b.len();
                sink.accumulate(a, |g| {
                    for (gr, ur) in g.chunks_mut(n).zip(upstream.chunks(n)) {
                        for ((gi, u), bv) in gr.iter_mut().zip(ur).zip(bd.iter()) {
                            *gi += u * bv;
                        }
                    }
                });
                sink.accumulate(b, |g| {
                    for (ur, ar) in upstream.chunks(n).zip(ad.chunks(n)) {
                        for ((gi, u), av) in g.iter_mut().zip(ur).zip(ar) {
                            *gi += u * av;
                        }
                    }
                });
            }
            Op::Scale(a, s) => sink.accumulate(a, |g| {
                g.iter_mut().zip(upstream).for_each(|(gi, u)| *gi += s * u)
            }),
            Op::AddScalar(a) => sink.accumulate(a, |g| add_into(g, upstream)),
            Op::MatMul(a, b) => {
                let (m, k, n) = (a.rows(), a.cols(), b.cols());
                // dA = dC . B^T
                if a.requires_grad() {
                    let bt = transpose_raw(&b.data(), k, n);
                    sink.accumulate(a, |g| gemm_acc(upstream, &bt, g, m, n, k));
                }
                // dB = A^T . dC
                if b.requires_grad() {
                    let at = transpose_raw(&a.data(), m, k);
                    sink.accumulate(b, |g| gemm_acc(&at, upstream, g, k, m, n));
                }
            }
            Op::Transpose(a) => {
                let (r, c) = (a.rows(), a.cols());
                sink.accumulate(a, |g| {
                    for i in 0..r {
                        for j in 0..c {
                            g[i * c + j] += upstream[j * r + i];
                        }
                    }
                });
            }
            Op::Tanh(a) => {
                let y = out.data();
                sink.accumulate(a, |g| {
                    for ((gi, u), yi) in g.iter_mut().zip(upstream).zip(y.iter()) {
                        *gi += u * (1.0 - yi * yi);
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = out.data();
                sink.accumulate(a, |g| {
                    for ((gi, u), yi) in g.iter_mut().zip(upstream).zip(y.iter()) {
                        *gi += u * yi * (1.0 - yi);
                    }
                });
            }
            Op::Relu(a) => {
                let x = a.data();
                sink.accumulate(a, |g| {
                    for ((gi, u), xi) in g.iter_mut().zip(upstream).zip(x.iter()) {
                        if *xi > 0.0 {
                            *gi += u;
                        }
                    }
                });
            }
            Op::SoftmaxRows(a) => {
                let y = out.data();
                let c = a.cols();
                sink.accumulate(a, |g| {
                    for ((gr, ur), yr) in g
                        .chunks_mut(c)
                        .zip(upstream.chunks(c))
                        .zip(y.chunks(c))
                    {
                        let s = dot(ur, yr);
                        for ((gi, u), yi) in gr.iter_mut().zip(ur).zip(yr) {
                            *gi += yi * (u - s);
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                normalized,
                inv_std,
            } => {
                let c = x.cols();
                let gd = gain.data();
                sink.accumulate(x, |g| {
                    let mut dxhat = vec![0.0; c];
                    for (row, (gr, ur)) in g.chunks_mut(c).zip(upstream.chunks(c)).enumerate() {
                        let xr = &normalized[row * c..(row + 1) * c];
                        for j in 0..c {
                            dxhat[j] = ur[j] * gd[j];
                        }
                        let sum: f64 = dxhat.iter().sum();
                        let sum_x = dot(&dxhat, xr);
                        let scale = inv_std[row] / c as f64;
                        for j in 0..c {
                            gr[j] += scale * (c as f64 * dxhat[j] - sum - xr[j] * sum_x);
                        }
                    }
                });
                sink.accumulate(gain, |g| {
                    for (ur, xr) in upstream.chunks(c).zip(normalized.chunks(c)) {
                        for j in 0..c {
                            g[j] += ur[j] * xr[j];
                        }
                    }
                });
                sink.accumulate(bias, |g| {
                    for ur in upstream.chunks(c) {
                        add_into(g, ur);
                    }
                });
            }
            Op::Mse(pred, target) => {
                let n = pred.len() as f64;
                let p = pred.data();
                let t = target.data();
                sink.accumulate(pred, |g| {
                    for ((gi, pi), ti) in g.iter_mut().zip(p.iter()).zip(t.iter()) {
                        *gi += upstream[0] * 2.0 * (pi - ti) / n;
                    }
                });
            }
            Op::Sum(a) => sink.accumulate(a, |g| g.iter_mut().for_each(|gi| *gi += upstream[0])),
            Op::MeanRows(a) => {
                let (r, c) = (a.rows(), a.cols());
                sink.accumulate(a, |g| {
                    for gr in g.chunks_mut(c) {
                        for (gi, u) in gr.iter_mut().zip(upstream) {
                            *gi += u / r as f64;
                        }
                    }
                });
            }
            Op::SelectRows(a, idx) => {
                let c = a.cols();
                sink.accumulate(a, |g| {
                    for (k, &r) in idx.iter().enumerate() {
                        add_into(&mut g[r * c..(r + 1) * c], &upstream[k * c..(k + 1) * c]);
                    }
                });
            }
            Op::PickColumns(a, idx) => {
                let c = a.cols();
                sink.accumulate(a, |g| {
                    for (r, &j) in idx.iter().enumerate() {
                        g[r * c + j] += upstream[r];
                    }
                });
            }
            Op::ConcatRows(ts) => {
                let mut offset = 0;
                for t in ts {
                    let len = t.len();
                    sink.accumulate(t, |g| add_into(g, &upstream[offset..offset + len]));
                    offset += len;
                }
            }
            Op::ConcatCols(ts) => {
                let total = out.cols();
                let mut offset = 0;
                for t in ts {
                    let c = t.cols();
                    sink.accumulate(t, |g| {
                        for (r, gr) in g.chunks_mut(c).enumerate() {
                            add_into(gr, &upstream[r * total + offset..r * total + offset + c]);
                        }
                    });
                    offset += c;
                }
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn transpose_raw(d: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = d[i * cols + j];
        }
    }
    out
}

/// `c += a . b` for row-major `a: m x k`, `b: k x n`, `c: m x n`.
///
/// Every output element is accumulated as `c + a[.,0] b[0,.] + a[.,1] b[1,.]
/// + ...` in that order whatever the blocking or instruction set, so results
/// are bitwise reproducible.
fn gemm_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            unsafe { gemm_avx2(a, b, c, m, k, n) };
            return;
        }
    }
    gemm_kernel(a, b, c, m, k, n);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn gemm_avx2(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    gemm_kernel(a, b, c, m, k, n)
}

const MR: usize = 4;
const NR: usize = 8;

#[inline(always)]
fn gemm_kernel(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    let mut i = 0;
    while i < m {
        let rows = MR.min(m - i);
        let mut j = 0;
        while j + NR <= n {
            let mut acc = [[0.0f64; NR]; MR];
            for r in 0..rows {
                acc[r].copy_from_slice(&c[(i + r) * n + j..(i + r) * n + j + NR]);
            }
            if rows == MR {
                for kk in 0..k {
                    let bv: &[f64; NR] = b[kk * n + j..kk * n + j + NR].try_into().unwrap();
                    for r in 0..MR {
                        let av = a[(i + r) * k + kk];
                        for q in 0..NR {
                            acc[r][q] += av * bv[q];
                        }
                    }
                }
            } else {
                for kk in 0..k {
                    let bv: &[f64; NR] = b[kk * n + j..kk * n + j + NR].try_into().unwrap();
                    for r in 0..rows {
                        let av = a[(i + r) * k + kk];
                        for q in 0..NR {
                            acc[r][q] += av * bv[q];
                        }
                    }
                }
            }
            for r in 0..rows {
                c[(i + r) * n + j..(i + r) * n + j + NR].copy_from_slice(&acc[r]);
            }
            j += NR;
        }
        for r in 0..rows {
            for jj in j..n {
                let mut s = c[(i + r) * n + jj];
                for kk in 0..k {
                    s += a[(i + r) * k + kk] * b[kk * n + jj];
                }
                c[(i + r) * n + jj] = s;
            }
        }
        i += rows;
    }
}

#[inline]
fn add_into(g: &mut [f64], upstream: &[f64]) {
    for (gi, u) in g.iter_mut().zip(upstream) {
        *gi += u;
    }
}

/// Adds `upstream` into `g`, summing over rows when `g` is a broadcast row.
fn reduce_broadcast(g: &mut [f64], upstream: &[f64], cols: usize) {
    if g.len() == upstream.len() {
        add_into(g, upstream);
    } else {
        for ur in upstream.chunks(cols) {
            add_into(g, ur);
        }
    }
}

impl Tensor {
    fn check_broadcast(&self, other: &Tensor, op: &'static str) -> Result<()> {
        let ok = self.shape() == other.shape() || (other.rows() == 1 && other.cols() == self.cols());
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                op,
                lhs: self.shape().to_vec(),
                rhs: other.shape().to_vec(),
            })
        }
    }

    fn zip_broadcast(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let a = self.data();
        let b = other.data();
        let mut out = Vec::with_capacity(a.len());
        for row in a.chunks(b.len()) {
            out.extend(row.iter().zip(b.iter()).map(|(&x, &y)| f(x, y)));
        }
        out
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.data().iter().map(|&x| f(x)).collect()
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.check_broadcast(other, "add")?;
        let data = self.zip_broadcast(other, |a, b| a + b);
        Ok(Tensor::from_op(self.rows(), self.cols(), data, Op::Add(self.clone(), other.clone())))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.check_broadcast(other, "sub")?;
        let data = self.zip_broadcast(other, |a, b| a - b);
        Ok(Tensor::from_op(self.rows(), self.cols(), data, Op::Sub(self.clone(), other.clone())))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.check_broadcast(other, "mul")?;
        let data = self.zip_broadcast(other, |a, b| a * b);
        Ok(Tensor::from_op(self.rows(), self.cols(), data, Op::Mul(self.clone(), other.clone())))
    }

    pub fn scale(&self, s: f64) -> Tensor {
        Tensor::from_op(self.rows(), self.cols(), self.map(|x| x * s), Op::Scale(self.clone(), s))
    }

    pub fn add_scalar(&self, s: f64) -> Tensor {
        Tensor::from_op(self.rows(), self.cols(), self.map(|x| x + s), Op::AddScalar(self.clone()))
    }

    /// `1 - self`, the GRU interpolation weight.
    pub fn one_minus(&self) -> Tensor {
        self.scale(-1.0).add_scalar(1.0)
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k, n) = (self.rows(), self.cols(), other.cols());
        if other.rows() != k {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape().to_vec(),
                rhs: other.shape().to_vec(),
            });
        }
        let mut out = vec![0.0; m * n];
        gemm_acc(&self.data(), &other.data(), &mut out, m, k, n);
        Ok(Tensor::from_op(m, n, out, Op::MatMul(self.clone(), other.clone())))
    }

    pub fn transpose(&self) -> Tensor {
        let (r, c) = (self.rows(), self.cols());
        let d = self.data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = d[i * c + j];
            }
        }
        drop(d);
        Tensor::from_op(c, r, out, Op::Transpose(self.clone()))
    }

    pub fn tanh(&self) -> Tensor {
        Tensor::from_op(self.rows(), self.cols(), self.map(f64::tanh), Op::Tanh(self.clone()))
    }

    pub fn sigmoid(&self) -> Tensor {
        Tensor::from_op(self.rows(), self.cols(), self.map(sigmoid), Op::Sigmoid(self.clone()))
    }

    pub fn relu(&self) -> Tensor {
        Tensor::from_op(self.rows(), self.cols(), self.map(|x| x.max(0.0)), Op::Relu(self.clone()))
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&self) -> Tensor {
        let c = self.cols();
        let mut out = self.to_vec();
        for row in out.chunks_mut(c) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }
        Tensor::from_op(self.rows(), c, out, Op::SoftmaxRows(self.clone()))
    }

    /// Normalizes each row to zero mean and unit (biased) variance, then
    /// applies the `1 x cols` affine `gain`, `bias`.
    pub fn layer_norm(&self, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor> {
        let c = self.cols();
        for p in [gain, bias] {
            if p.shape() != [1, c] {
                return Err(Error::ShapeMismatch {
                    op: "layer_norm",
                    lhs: self.shape().to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
        }
        let x = self.data();
        let g = gain.data();
        let b = bias.data();
        let mut normalized = vec![0.0; x.len()];
        let mut inv_std = Vec::with_capacity(self.rows());
        let mut out = vec![0.0; x.len()];
        for (r, xr) in x.chunks(c).enumerate() {
            let mean = xr.iter().sum::<f64>() / c as f64;
            let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for j in 0..c {
                let n = (xr[j] - mean) * is;
                normalized[r * c + j] = n;
                out[r * c + j] = n * g[j] + b[j];
            }
        }
        drop((x, g, b));
        Ok(Tensor::from_op(
            self.rows(),
            c,
            out,
            Op::LayerNorm {
                x: self.clone(),
                gain: gain.clone(),
                bias: bias.clone(),
                normalized,
                inv_std,
            },
        ))
    }

    /// Mean of squared differences; `target` is treated as a constant.
    pub fn mse_loss(&self, target: &Tensor) -> Result<Tensor> {
        if self.shape() != target.shape() {
            return Err(Error::ShapeMismatch {
                op: "mse_loss",
                lhs: self.shape().to_vec(),
                rhs: target.shape().to_vec(),
            });
        }
        let p = self.data();
        let t = target.data();
        let loss = p.iter().zip(t.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64;
        drop((p, t));
        Ok(Tensor::from_op(1, 1, vec![loss], Op::Mse(self.clone(), target.detach())))
    }

    pub fn sum(&self) -> Tensor {
        let s = self.data().iter().sum();
        Tensor::from_op(1, 1, vec![s], Op::Sum(self.clone()))
    }

    /// Column means, `r x c -> 1 x c`.
    pub fn mean_rows(&self) -> Tensor {
        let (r, c) = (self.rows(), self.cols());
        let mut out = vec![0.0; c];
        for row in self.data().chunks(c) {
            add_into(&mut out, row);
        }
        out.iter_mut().for_each(|v| *v /= r as f64);
        Tensor::from_op(1, c, out, Op::MeanRows(self.clone()))
    }

    /// Gathers rows by index (repeats allowed).
    pub fn select_rows(&self, indices: &[usize]) -> Result<Tensor> {
        let c = self.cols();
        if indices.is_empty() || indices.iter().any(|&i| i >= self.rows()) {
            return Err(Error::Invalid(format!(
                "row indices {indices:?} out of range for {} rows",
                self.rows()
            )));
        }
        let d = self.data();
        let mut out = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            out.extend_from_slice(&d[i * c..(i + 1) * c]);
        }
        drop(d);
        Ok(Tensor::from_op(indices.len(), c, out, Op::SelectRows(self.clone(), indices.to_vec())))
    }

    /// Contiguous block of `len` rows starting at `start`.
    pub fn slice_rows(&self, start: usize, len: usize) -> Result<Tensor> {
        let idx: Vec<usize> = (start..start + len).collect();
        self.select_rows(&idx)
    }

    /// One entry per row: `out[r] = self[r, columns[r]]`, giving `rows x 1`.
    pub fn pick_columns(&self, columns: &[usize]) -> Result<Tensor> {
        let c = self.cols();
        if columns.len() != self.rows() || columns.iter().any(|&j| j >= c) {
            return Err(Error::Invalid(format!(
                "column picks {columns:?} do not fit shape {:?}",
                self.shape()
            )));
        }
        let d = self.data();
        let out = columns.iter().enumerate().map(|(r, &j)| d[r * c + j]).collect();
        drop(d);
        Ok(Tensor::from_op(self.rows(), 1, out, Op::PickColumns(self.clone(), columns.to_vec())))
    }

    pub fn concat_rows(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or(Error::Invalid("concat of nothing".into()))?;
        let c = first.cols();
        let mut out = Vec::new();
        for p in parts {
            if p.cols() != c {
                return Err(Error::ShapeMismatch {
                    op: "concat_rows",
                    lhs: first.shape().to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
            out.extend_from_slice(&p.data());
        }
        let rows = out.len() / c;
        Ok(Tensor::from_op(rows, c, out, Op::ConcatRows(parts.to_vec())))
    }

    pub fn concat_cols(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or(Error::Invalid("concat of nothing".into()))?;
        let r = first.rows();
        if let Some(bad) = parts.iter().find(|p| p.rows() != r) {
            return Err(Error::ShapeMismatch {
                op: "concat_cols",
                lhs: first.shape().to_vec(),
                rhs: bad.shape().to_vec(),
            });
        }
        let total: usize = parts.iter().map(Tensor::cols).sum();
        let mut out = Vec::with_capacity(r * total);
        for row in 0..r {
            for p in parts {
                let c = p.cols();
                out.extend_from_slice(&p.data()[row * c..(row + 1) * c]);
            }
        }
        Ok(Tensor::from_op(r, total, out, Op::ConcatCols(parts.to_vec())))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
