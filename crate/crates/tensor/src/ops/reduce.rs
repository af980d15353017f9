use crate::error::{Result, TensorError};
use crate::ops::split_axis;
use crate::real::Real;
use crate::tensor::Tensor;

fn reduced_shape(shape: &[usize], axis: usize) -> Vec<usize> {
    let mut out: Vec<usize> = shape
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != axis)
        .map(|(_, &d)| d)
        .collect();
    if out.is_empty() {
        out.push(1);
    }
    out
}

impl<T: Real> Tensor<T> {
    /// Sum of all entries as a `[1]` tensor.
    pub fn sum(&self) -> Tensor<T> {
        let s: T = self.data().iter().copied().sum();
        let n = self.numel();
        Tensor::from_op(
            "sum",
            vec![s],
            vec![1],
            vec![self.clone()],
            Box::new(move |g| vec![Some(vec![g[0]; n])]),
        )
        .expect("scalar shape")
    }

    pub fn mean(&self) -> Tensor<T> {
        let n = self.numel();
        self.sum().scale(1.0 / n as f64)
    }

    /// Sum over one axis, removing it.
    pub fn sum_axis(&self, axis: usize) -> Result<Tensor<T>> {
        if axis >= self.rank() {
            return Err(TensorError::dim(
                "sum_axis",
                format!("axis {axis} out of range for shape {:?}", self.shape()),
            ));
        }
        let (outer, len, inner) = split_axis(self.shape(), axis);
        let x = self.data();
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for a in 0..len {
                let src = &x[(o * len + a) * inner..(o * len + a + 1) * inner];
                let dst = &mut out[o * inner..(o + 1) * inner];
                dst.iter_mut().zip(src).for_each(|(d, &s)| *d += s);
            }
        }
        Tensor::from_op(
            "sum_axis",
            out,
            reduced_shape(self.shape(), axis),
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![T::zero(); outer * len * inner];
                for o in 0..outer {
                    for a in 0..len {
                        gx[(o * len + a) * inner..(o * len + a + 1) * inner]
                            .copy_from_slice(&g[o * inner..(o + 1) * inner]);
                    }
                }
                vec![Some(gx)]
            }),
        )
    }

    pub fn mean_axis(&self, axis: usize) -> Result<Tensor<T>> {
        let len = *self.shape().get(axis).ok_or_else(|| {
            TensorError::dim(
                "mean_axis",
                format!("axis {axis} out of range for shape {:?}", self.shape()),
            )
        })?;
        Ok(self.sum_axis(axis)?.scale(1.0 / len as f64))
    }

    /// Mean over the trailing two (spatial) axes: `[..., h, w] -> [...]`.
    pub fn global_avg_pool(&self) -> Result<Tensor<T>> {
        if self.rank() < 2 {
            return Err(TensorError::dim(
                "global_avg_pool",
                format!("needs rank >= 2, got shape {:?}", self.shape()),
            ));
        }
        let r = self.rank();
        let window = self.shape()[r - 2] * self.shape()[r - 1];
        let mut shape = self.shape()[..r - 2].to_vec();
        if shape.is_empty() {
            shape.push(1);
        }
        let inv = T::one() / T::cast(window as f64);
        let out: Vec<T> = self
            .data()
            .chunks_exact(window)
            .map(|c| c.iter().copied().sum::<T>() * inv)
            .collect();
        Tensor::from_op(
            "global_avg_pool",
            out,
            shape,
            vec![self.clone()],
            Box::new(move |g| {
                let gx = g
                    .iter()
                    .flat_map(|&v| std::iter::repeat_n(v * inv, window))
                    .collect();
                vec![Some(gx)]
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_two_by_two() {
        let x = Tensor::<f64>::from_f64(&[1.0, 2.0, 3.0, 4.0], &[2, 2]).unwrap();
        assert_eq!(x.global_avg_pool().unwrap().data(), &[2.5]);
    }

    #[test]
    fn pool_constant_and_unit_window() {
        let x = Tensor::<f64>::full(&[2, 3, 4, 5], 7.0).unwrap();
        let p = x.global_avg_pool().unwrap();
        assert_eq!(p.shape(), &[2, 3]);
        assert!(p.data().iter().all(|&v| (v - 7.0).abs() < 1e-12));

        let y = Tensor::<f64>::from_f64(&[1.0, -2.0, 3.0], &[3, 1, 1]).unwrap();
        assert_eq!(y.global_avg_pool().unwrap().data(), y.data());
    }

    #[test]
    fn pool_rejects_rank_one() {
        let x = Tensor::<f64>::from_f64(&[1.0], &[1]).unwrap();
        assert!(matches!(
            x.global_avg_pool(),
            Err(TensorError::Dimension { .. })
        ));
    }

    #[test]
    fn sum_axis_middle() {
        let x = Tensor::<f64>::from_f64(&[1., 2., 3., 4., 5., 6.], &[1, 3, 2]).unwrap();
        let s = x.sum_axis(1).unwrap();
        assert_eq!(s.shape(), &[1, 2]);
        assert_eq!(s.data(), &[9.0, 12.0]);
    }
}
