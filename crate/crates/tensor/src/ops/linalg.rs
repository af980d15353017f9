use crate::error::{Result, TensorError};
use crate::real::Real;
use crate::tensor::Tensor;

/// `c[m,n] += a[m,k] * b[k,n]`
pub(crate) fn gemm_acc<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            row.iter_mut().zip(brow).for_each(|(c, &b)| *c += av * b);
        }
    }
}

/// Eight interleaved partial sums, combined pairwise; the order depends
/// only on the length.
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    for (l, (&x, &y)) in ra.iter().zip(rb).enumerate() {
        acc[l] += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]))
}

/// `c[m,n] += a[m,k] * b[n,k]^T`
pub(crate) fn gemm_nt_acc<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            c[i * n + j] += dot(arow, &b[j * k..(j + 1) * k]);
        }
    }
}

/// `c[k,n] += a[m,k]^T * b[m,n]`
pub(crate) fn gemm_tn_acc<T: Real>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let crow = &mut c[p * n..(p + 1) * n];
            crow.iter_mut().zip(brow).for_each(|(c, &b)| *c += av * b);
        }
    }
}

impl<T: Real> Tensor<T> {
    /// `[m,k] x [k,n]` or batched `[b,m,k] x [b,k,n]`.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (a, b) = (self.shape(), other.shape());
        let (batch, m, k, n) = match (a.len(), b.len()) {
            (2, 2) if a[1] == b[0] => (1, a[0], a[1], b[1]),
            (3, 3) if a[0] == b[0] && a[2] == b[1] => (a[0], a[1], a[2], b[2]),
            _ => {
                return Err(TensorError::dim(
                    "matmul",
                    format!("incompatible shapes {a:?} and {b:?}"),
                ))
            }
        };
        let mut out = vec![T::zero(); batch * m * n];
        for bi in 0..batch {
            gemm_acc(
                &self.data()[bi * m * k..(bi + 1) * m * k],
                &other.data()[bi * k * n..(bi + 1) * k * n],
                &mut out[bi * m * n..(bi + 1) * m * n],
                m,
                k,
                n,
            );
        }
        let shape = if a.len() == 2 {
            vec![m, n]
        } else {
            vec![batch, m, n]
        };
        let (lhs, rhs) = (self.clone(), other.clone());
        Tensor::from_op(
            "matmul",
            out,
            shape,
            vec![self.clone(), other.clone()],
            Box::new(move |g| {
                let ga = lhs.requires_grad().then(|| {
                    let mut ga = vec![T::zero(); batch * m * k];
                    for bi in 0..batch {
                        gemm_nt_acc(
                            &g[bi * m * n..(bi + 1) * m * n],
                            &rhs.data()[bi * k * n..(bi + 1) * k * n],
                            &mut ga[bi * m * k..(bi + 1) * m * k],
                            m,
                            n,
                            k,
                        );
                    }
                    ga
                });
                let gb = rhs.requires_grad().then(|| {
                    let mut gb = vec![T::zero(); batch * k * n];
                    for bi in 0..batch {
                        gemm_tn_acc(
                            &lhs.data()[bi * m * k..(bi + 1) * m * k],
                            &g[bi * m * n..(bi + 1) * m * n],
                            &mut gb[bi * k * n..(bi + 1) * k * n],
                            m,
                            k,
                            n,
                        );
                    }
                    gb
                });
                vec![ga, gb]
            }),
        )
    }

    /// Softmax over the trailing axis.
    pub fn softmax_last(&self) -> Tensor<T> {
        let d = *self.shape().last().expect("rank >= 1");
        let mut out = Vec::with_capacity(self.numel());
        for row in self.data().chunks_exact(d) {
            let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
            let start = out.len();
            let mut z = T::zero();
            for &v in row {
                let e = (v - mx).exp();
                z += e;
                out.push(e);
            }
            out[start..].iter_mut().for_each(|e| *e /= z);
        }
        let y = out.clone();
        Tensor::from_op(
            "softmax",
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = Vec::with_capacity(g.len());
                for (gr, yr) in g.chunks_exact(d).zip(y.chunks_exact(d)) {
                    let dot: T = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum();
                    gx.extend(gr.iter().zip(yr).map(|(&g, &y)| y * (g - dot)));
                }
                vec![Some(gx)]
            }),
        )
        .expect("softmax preserves shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_2d() {
        let a = Tensor::<f64>::from_f64(&[1., 2., 3., 4., 5., 6.], &[2, 3]).unwrap();
        let b = Tensor::<f64>::from_f64(&[1., 0., 0., 1., 1., 1.], &[3, 2]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[4., 5., 10., 11.]);
    }

    #[test]
    fn matmul_rejects_inner_mismatch() {
        let a = Tensor::<f64>::zeros(&[2, 3]).unwrap();
        let b = Tensor::<f64>::zeros(&[2, 2]).unwrap();
        assert!(matches!(a.matmul(&b), Err(TensorError::Dimension { .. })));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = Tensor::<f64>::from_f64(&[0.0, 3f64.ln(), 5.0, -5.0], &[2, 2]).unwrap();
        let y = x.softmax_last();
        assert!((y.data()[0] - 0.25).abs() < 1e-12);
        assert!((y.data()[1] - 0.75).abs() < 1e-12);
        assert!((y.data()[2] + y.data()[3] - 1.0).abs() < 1e-12);
    }
}
