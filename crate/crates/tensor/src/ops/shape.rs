use crate::error::{Result, TensorError};
use crate::ops::split_axis;
use crate::real::Real;
use crate::tensor::{shape_numel, Tensor};

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Gathers `data` (laid out as `shape`) into the order given by `perm`.
fn permute_data<T: Copy>(data: &[T], shape: &[usize], perm: &[usize]) -> Vec<T> {
    let in_strides = strides(shape);
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let n = data.len();
    let mut out = Vec::with_capacity(n);
    let rank = shape.len();
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    for _ in 0..n {
        out.push(data[off]);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            off += src_strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            off -= src_strides[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
    out
}

impl<T: Real> Tensor<T> {
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<T>> {
        if shape_numel(shape) != self.numel() || shape.contains(&0) {
            return Err(TensorError::dim(
                "reshape",
                format!("cannot view {:?} as {:?}", self.shape(), shape),
            ));
        }
        Tensor::from_op(
            "reshape",
            self.data().to_vec(),
            shape.to_vec(),
            vec![self.clone()],
            Box::new(|g| vec![Some(g.to_vec())]),
        )
    }

    /// Reorders axes: output axis `i` is input axis `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Tensor<T>> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if perm.len() != rank
            || perm
                .iter()
                .any(|&p| p >= rank || std::mem::replace(&mut seen[p], true))
        {
            return Err(TensorError::dim(
                "permute",
                format!(
                    "{perm:?} is not a permutation of the axes of {:?}",
                    self.shape()
                ),
            ));
        }
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape()[p]).collect();
        let out = permute_data(self.data(), self.shape(), perm);
        let mut inverse = vec![0; rank];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let out_shape_b = out_shape.clone();
        Tensor::from_op(
            "permute",
            out,
            out_shape,
            vec![self.clone()],
            Box::new(move |g| vec![Some(permute_data(g, &out_shape_b, &inverse))]),
        )
    }

    /// Swaps the two trailing axes.
    pub fn transpose_last(&self) -> Result<Tensor<T>> {
        let r = self.rank();
        if r < 2 {
            return Err(TensorError::dim(
                "transpose_last",
                format!("rank of {:?} is below 2", self.shape()),
            ));
        }
        let mut perm: Vec<usize> = (0..r).collect();
        perm.swap(r - 2, r - 1);
        self.permute(&perm)
    }

    /// Slice `[start, start + len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor<T>> {
        if axis >= self.rank() || len == 0 || start + len > self.shape()[axis] {
            return Err(TensorError::dim(
                "narrow",
                format!(
                    "range {start}..{} on axis {axis} of {:?}",
                    start + len,
                    self.shape()
                ),
            ));
        }
        let (outer, full, inner) = split_axis(self.shape(), axis);
        let x = self.data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            out.extend_from_slice(&x[base..base + len * inner]);
        }
        let mut shape = self.shape().to_vec();
        shape[axis] = len;
        Tensor::from_op(
            "narrow",
            out,
            shape,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![T::zero(); outer * full * inner];
                for o in 0..outer {
                    let base = (o * full + start) * inner;
                    gx[base..base + len * inner]
                        .copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                vec![Some(gx)]
            }),
        )
    }

    /// Picks index `i` along `axis` and drops the axis.
    pub fn select(&self, axis: usize, i: usize) -> Result<Tensor<T>> {
        let picked = self.narrow(axis, i, 1)?;
        let mut shape: Vec<usize> = self.shape().to_vec();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        picked.reshape(&shape)
    }

    /// Inserts a unit axis at `axis`.
    pub fn unsqueeze(&self, axis: usize) -> Result<Tensor<T>> {
        if axis > self.rank() {
            return Err(TensorError::dim(
                "unsqueeze",
                format!("axis {axis} beyond rank of {:?}", self.shape()),
            ));
        }
        let mut shape = self.shape().to_vec();
        shape.insert(axis, 1);
        self.reshape(&shape)
    }

    /// Joins tensors that agree on every axis except `axis`.
    pub fn concat(parts: &[Tensor<T>], axis: usize) -> Result<Tensor<T>> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::dim("concat", "no inputs"))?;
        if axis >= first.rank() {
            return Err(TensorError::dim(
                "concat",
                format!("axis {axis} out of range for {:?}", first.shape()),
            ));
        }
        for p in parts {
            let ok = p.rank() == first.rank()
                && p.shape()
                    .iter()
                    .zip(first.shape())
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(TensorError::dim(
                    "concat",
                    format!(
                        "shapes {:?} and {:?} disagree off axis {axis}",
                        first.shape(),
                        p.shape()
                    ),
                ));
            }
        }
        let (outer, _, inner) = split_axis(first.shape(), axis);
        let lens: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let total: usize = lens.iter().sum();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (p, &l) in parts.iter().zip(&lens) {
                out.extend_from_slice(&p.data()[o * l * inner..(o + 1) * l * inner]);
            }
        }
        let mut shape = first.shape().to_vec();
        shape[axis] = total;
        let lens_b = lens.clone();
        Tensor::from_op(
            "concat",
            out,
            shape,
            parts.to_vec(),
            Box::new(move |g| {
                let mut grads: Vec<Vec<T>> = lens_b
                    .iter()
                    .map(|&l| Vec::with_capacity(outer * l * inner))
                    .collect();
                let mut off = 0;
                for _ in 0..outer {
                    for (gp, &l) in grads.iter_mut().zip(&lens_b) {
                        gp.extend_from_slice(&g[off..off + l * inner]);
                        off += l * inner;
                    }
                }
                grads.into_iter().map(Some).collect()
            }),
        )
    }

    /// Expands unit axes to `shape`. Ranks must match; only extents equal
    /// to 1 may grow.
    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Tensor<T>> {
        let ok = shape.len() == self.rank()
            && self
                .shape()
                .iter()
                .zip(shape)
                .all(|(&a, &b)| a == b || (a == 1 && b >= 1));
        if !ok {
            return Err(TensorError::dim(
                "broadcast_to",
                format!("cannot broadcast {:?} to {:?}", self.shape(), shape),
            ));
        }
        if self.shape() == shape {
            return Ok(self.clone());
        }
        let in_strides = strides(self.shape());
        let src_strides: Vec<usize> = self
            .shape()
            .iter()
            .zip(&in_strides)
            .map(|(&d, &s)| if d == 1 { 0 } else { s })
            .collect();
        let out_shape = shape.to_vec();
        let n = shape_numel(shape);
        let rank = shape.len();
        let index_map = move || {
            let mut map = Vec::with_capacity(n);
            let mut idx = vec![0usize; rank];
            let mut off = 0usize;
            for _ in 0..n {
                map.push(off);
                for ax in (0..rank).rev() {
                    idx[ax] += 1;
                    off += src_strides[ax];
                    if idx[ax] < out_shape[ax] {
                        break;
                    }
                    off -= src_strides[ax] * out_shape[ax];
                    idx[ax] = 0;
                }
            }
            map
        };
        let map = index_map();
        let x = self.data();
        let out: Vec<T> = map.iter().map(|&i| x[i]).collect();
        let in_n = self.numel();
        Tensor::from_op(
            "broadcast_to",
            out,
            shape.to_vec(),
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![T::zero(); in_n];
                for (&i, &v) in map.iter().zip(g) {
                    gx[i] += v;
                }
                vec![Some(gx)]
            }),
        )
    }
}
