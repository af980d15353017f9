//! Cross-correlation (no kernel flip) with zero padding, lowered per sample
//! to patch columns and a matrix product.

use super::linalg::{gemm_acc, gemm_nt_acc, gemm_tn_acc};
use crate::error::{Result, TensorError};
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
struct Geometry {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    o: usize,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    /// Output columns `ox` whose input column `ox*sw + kj - pw` lies in `[0, w)`.
    #[inline]
    fn col_range(&self, kj: usize) -> (usize, usize) {
        let lo = if self.pw > kj {
            (self.pw - kj).div_ceil(self.sw)
        } else {
            0
        };
        // ox*sw + kj - pw <= w - 1
        let lim = self.w + self.pw;
        let hi = if lim > kj {
            ((lim - kj - 1) / self.sw + 1).min(self.ow)
        } else {
            0
        };
        (lo, hi.max(lo))
    }

    #[inline]
    fn in_row(&self, oy: usize, ki: usize) -> Option<usize> {
        let iy = oy * self.sh + ki;
        (iy >= self.ph && iy - self.ph < self.h).then(|| iy - self.ph)
    }
}

impl Geometry {
    fn patch(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn plane(&self) -> usize {
        self.oh * self.ow
    }

    /// Unfolds the whole batch into `[c*kh*kw, n*oh*ow]` patch columns;
    /// sample `i` owns columns `i*oh*ow..(i+1)*oh*ow`.
    fn im2col<T: Real>(&self, x: &[T]) -> Vec<T> {
        let (plane, stride) = (self.plane(), self.n * self.plane());
        let mut cols = vec![T::zero(); self.patch() * stride];
        for i in 0..self.n {
            for c in 0..self.c {
                let src = &x[(i * self.c + c) * self.h * self.w..][..self.h * self.w];
                for ki in 0..self.kh {
                    for kj in 0..self.kw {
                        let r = (c * self.kh + ki) * self.kw + kj;
                        let dst = &mut cols[r * stride + i * plane..][..plane];
                        let (lo, hi) = self.col_range(kj);
                        for oy in 0..self.oh {
                            let Some(iy) = self.in_row(oy, ki) else {
                                continue;
                            };
                            let srow = &src[iy * self.w..(iy + 1) * self.w];
                            for ox in lo..hi {
                                dst[oy * self.ow + ox] = srow[ox * self.sw + kj - self.pw];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    /// Adjoint of [`Geometry::im2col`].
    fn col2im<T: Real>(&self, cols: &[T]) -> Vec<T> {
        let (plane, stride) = (self.plane(), self.n * self.plane());
        let mut gx = vec![T::zero(); self.n * self.c * self.h * self.w];
        for i in 0..self.n {
            for c in 0..self.c {
                let dst = &mut gx[(i * self.c + c) * self.h * self.w..][..self.h * self.w];
                for ki in 0..self.kh {
                    for kj in 0..self.kw {
                        let r = (c * self.kh + ki) * self.kw + kj;
                        let src = &cols[r * stride + i * plane..][..plane];
                        let (lo, hi) = self.col_range(kj);
                        for oy in 0..self.oh {
                            let Some(iy) = self.in_row(oy, ki) else {
                                continue;
                            };
                            let drow = &mut dst[iy * self.w..(iy + 1) * self.w];
                            for ox in lo..hi {
                                drow[ox * self.sw + kj - self.pw] += src[oy * self.ow + ox];
                            }
                        }
                    }
                }
            }
        }
        gx
    }
}

/// `[a, b, p]` to `[b, a, p]`.
fn swap_outer<T: Real>(v: &[T], a: usize, b: usize, p: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(v.len());
    for j in 0..b {
        for i in 0..a {
            out.extend_from_slice(&v[(i * b + j) * p..][..p]);
        }
    }
    out
}

impl<T: Real> Tensor<T> {
    /// `[n,c,h,w] * [o,c,kh,kw] -> [n,o,oh,ow]` with equal stride and
    /// padding on both spatial axes.
    pub fn conv2d(
        &self,
        kernel: &Tensor<T>,
        bias: Option<&Tensor<T>>,
        stride: usize,
        padding: usize,
    ) -> Result<Tensor<T>> {
        self.conv2d_general(kernel, bias, (stride, stride), (padding, padding))
    }

    pub fn conv2d_general(
        &self,
        kernel: &Tensor<T>,
        bias: Option<&Tensor<T>>,
        (sh, sw): (usize, usize),
        (ph, pw): (usize, usize),
    ) -> Result<Tensor<T>> {
        let (xs, ks) = (self.shape(), kernel.shape());
        if xs.len() != 4 || ks.len() != 4 {
            return Err(TensorError::dim(
                "conv2d",
                format!("expected rank-4 input and kernel, got {xs:?} and {ks:?}"),
            ));
        }
        if xs[1] != ks[1] {
            return Err(TensorError::dim(
                "conv2d",
                format!(
                    "input {xs:?} has {} channels but kernel {ks:?} expects {}",
                    xs[1], ks[1]
                ),
            ));
        }
        if sh == 0 || sw == 0 {
            return Err(TensorError::Config("conv2d stride must be positive".into()));
        }
        if ks[2] > xs[2] + 2 * ph || ks[3] > xs[3] + 2 * pw {
            return Err(TensorError::dim(
                "conv2d",
                format!("kernel {ks:?} larger than padded input {xs:?} (padding {ph},{pw})"),
            ));
        }
        if let Some(b) = bias {
            if b.shape() != [ks[0]] {
                return Err(TensorError::dim(
                    "conv2d",
                    format!("bias {:?} does not match kernel {ks:?}", b.shape()),
                ));
            }
        }
        let g = Geometry {
            n: xs[0],
            c: xs[1],
            h: xs[2],
            w: xs[3],
            o: ks[0],
            kh: ks[2],
            kw: ks[3],
            sh,
            sw,
            ph,
            pw,
            oh: (xs[2] + 2 * ph - ks[2]) / sh + 1,
            ow: (xs[3] + 2 * pw - ks[3]) / sw + 1,
        };
        let (x, k) = (self.data(), kernel.data());
        let (plane, cols_n) = (g.plane(), g.n * g.plane());
        // Each output entry is a dot product over the patch axis in a fixed
        // order, so a sample's result does not depend on the rest of the batch.
        let mut out_t = vec![T::zero(); g.o * cols_n];
        if let Some(b) = bias {
            for (o, &bv) in b.data().iter().enumerate() {
                out_t[o * cols_n..(o + 1) * cols_n]
                    .iter_mut()
                    .for_each(|v| *v = bv);
            }
        }
        let cols = g.im2col(x);
        gemm_acc(k, &cols, &mut out_t, g.o, g.patch(), cols_n);
        let out = swap_outer(&out_t, g.o, g.n, plane);

        let mut parents = vec![self.clone(), kernel.clone()];
        if let Some(b) = bias {
            parents.push(b.clone());
        }
        let (input, kern, has_bias) = (self.clone(), kernel.clone(), bias.is_some());
        Tensor::from_op(
            "conv2d",
            out,
            vec![g.n, g.o, g.oh, g.ow],
            parents,
            Box::new(move |gy| {
                let k = kern.data();
                let need_x = input.requires_grad();
                let need_k = kern.requires_grad();
                let (plane, cols_n) = (g.plane(), g.n * g.plane());
                let gy_t = swap_outer(gy, g.n, g.o, plane);
                let gk = need_k.then(|| {
                    let mut gk = vec![T::zero(); k.len()];
                    gemm_nt_acc(&gy_t, &cols, &mut gk, g.o, cols_n, g.patch());
                    gk
                });
                let gx = need_x.then(|| {
                    let mut gcols = vec![T::zero(); g.patch() * cols_n];
                    gemm_tn_acc(k, &gy_t, &mut gcols, g.o, g.patch(), cols_n);
                    g.col2im(&gcols)
                });
                let mut grads = vec![gx, gk];
                if has_bias {
                    let plane = g.oh * g.ow;
                    let mut gb = vec![T::zero(); g.o];
                    for i in 0..g.n {
                        for (o, b) in gb.iter_mut().enumerate() {
                            let s = (i * g.o + o) * plane;
                            *b += gy[s..s + plane].iter().copied().sum::<T>();
                        }
                    }
                    grads.push(Some(gb));
                }
                grads
            }),
        )
    }

    /// `[b,c,l] * [o,c,k] -> [b,o,l + 2p - k + 1]`.
    pub fn conv1d(
        &self,
        kernel: &Tensor<T>,
        bias: Option<&Tensor<T>>,
        padding: usize,
    ) -> Result<Tensor<T>> {
        let (xs, ks) = (self.shape(), kernel.shape());
        if xs.len() != 3 || ks.len() != 3 {
            return Err(TensorError::dim(
                "conv1d",
                format!("expected rank-3 input and kernel, got {xs:?} and {ks:?}"),
            ));
        }
        if xs[1] != ks[1] {
            return Err(TensorError::dim(
                "conv1d",
                format!(
                    "input {xs:?} has {} channels but kernel {ks:?} expects {}",
                    xs[1], ks[1]
                ),
            ));
        }
        if ks[2] > xs[2] + 2 * padding {
            return Err(TensorError::dim(
                "conv1d",
                format!("kernel {ks:?} longer than padded input {xs:?} (padding {padding})"),
            ));
        }
        let x4 = self.reshape(&[xs[0], xs[1], 1, xs[2]])?;
        let k4 = kernel.reshape(&[ks[0], ks[1], 1, ks[2]])?;
        let y = x4.conv2d_general(&k4, bias, (1, 1), (0, padding))?;
        let l_out = y.shape()[3];
        y.reshape(&[xs[0], ks[0], l_out])
    }
}
