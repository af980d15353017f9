use crate::error::{Result, TensorError};
use crate::real::Real;
use crate::tensor::Tensor;

/// Single-head attention over `[b, lq, d]` queries and `[b, lk, d]` keys
/// with `[b, lk, dv]` values. Returns `(output [b, lq, dv], weights [b, lq, lk])`.
pub fn scaled_dot_product_attention<T: Real>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (qs, ks, vs) = (q.shape(), k.shape(), v.shape());
    if qs.len() != 3
        || ks.len() != 3
        || vs.len() != 3
        || qs[0] != ks[0]
        || ks[0] != vs[0]
        || qs[2] != ks[2]
        || ks[1] != vs[1]
    {
        return Err(TensorError::dim(
            "attention",
            format!("query {qs:?}, key {ks:?} and value {vs:?} are incompatible"),
        ));
    }
    let scores = q
        .matmul(&k.transpose_last()?)?
        .scale(1.0 / (qs[2] as f64).sqrt());
    let weights = scores.softmax_last();
    let out = weights.matmul(v)?;
    Ok((out, weights))
}

/// Splits the feature axis of `[b, l, d]` inputs into `heads` groups,
/// attends per head and concatenates. Output has the shape of `q`.
pub fn multi_head_attention<T: Real>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    heads: usize,
) -> Result<Tensor<T>> {
    let (qs, ks, vs) = (q.shape(), k.shape(), v.shape());
    if qs.len() != 3 || ks.len() != 3 || vs.len() != 3 {
        return Err(TensorError::dim(
            "multi_head_attention",
            format!("expected rank-3 inputs, got {qs:?}, {ks:?}, {vs:?}"),
        ));
    }
    if vs[2] != qs[2] {
        return Err(TensorError::dim(
            "multi_head_attention",
            format!("value {vs:?} must share the feature width of query {qs:?}"),
        ));
    }
    let d = qs[2];
    if heads == 0 || d % heads != 0 {
        return Err(TensorError::Config(format!(
            "feature width {d} is not divisible into {heads} heads"
        )));
    }
    let dh = d / heads;
    let split = |t: &Tensor<T>| -> Result<Tensor<T>> {
        let s = t.shape();
        t.reshape(&[s[0], s[1], heads, dh])?
            .permute(&[0, 2, 1, 3])?
            .reshape(&[s[0] * heads, s[1], dh])
    };
    let (out, _) = scaled_dot_product_attention(&split(q)?, &split(k)?, &split(v)?)?;
    out.reshape(&[qs[0], heads, qs[1], dh])?
        .permute(&[0, 2, 1, 3])?
        .reshape(qs)
}
