use crate::error::{Result, TensorError};
use crate::ops::split_axis;
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-channel running statistics of a batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMoments<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Real> RunningMoments<T> {
    pub fn fresh(channels: usize) -> Self {
        RunningMoments {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
        }
    }
}

pub struct BatchNormOutput<T: Real> {
    pub output: Tensor<T>,
    /// Exponential moving average after this batch (train mode only).
    pub updated: Option<RunningMoments<T>>,
}

impl<T: Real> Tensor<T> {
    /// Normalizes each slice along `channel_axis`. Train mode uses batch
    /// statistics (biased variance) and reports updated running moments;
    /// eval mode applies the running moments as a fixed affine map.
    #[allow(clippy::too_many_arguments)]
    pub fn batch_norm(
        &self,
        gamma: &Tensor<T>,
        beta: &Tensor<T>,
        running: &RunningMoments<T>,
        mode: Mode,
        channel_axis: usize,
        momentum: f64,
        eps: f64,
    ) -> Result<BatchNormOutput<T>> {
        if channel_axis >= self.rank() {
            return Err(TensorError::dim(
                "batch_norm",
                format!(
                    "channel axis {channel_axis} out of range for {:?}",
                    self.shape()
                ),
            ));
        }
        let (outer, ch, inner) = split_axis(self.shape(), channel_axis);
        if gamma.shape() != [ch]
            || beta.shape() != [ch]
            || running.mean.len() != ch
            || running.var.len() != ch
        {
            return Err(TensorError::dim(
                "batch_norm",
                format!(
                    "input {:?} has {ch} channels but gamma {:?}, beta {:?}",
                    self.shape(),
                    gamma.shape(),
                    beta.shape()
                ),
            ));
        }
        let count = outer * inner;
        let x = self.data();
        let at = move |o: usize, c: usize, i: usize| (o * ch + c) * inner + i;
        let eps_t = T::cast(eps);

        let (mean, var, updated) = match mode {
            Mode::Train => {
                if count < 2 {
                    return Err(TensorError::DegenerateBatch {
                        op: "batch_norm",
                        detail: format!("{count} element(s) per channel in {:?}", self.shape()),
                    });
                }
                let n = T::cast(count as f64);
                let mut mean = vec![T::zero(); ch];
                let mut var = vec![T::zero(); ch];
                for c in 0..ch {
                    let mut s = T::zero();
                    for o in 0..outer {
                        for i in 0..inner {
                            s += x[at(o, c, i)];
                        }
                    }
                    let mu = s / n;
                    let mut v = T::zero();
                    for o in 0..outer {
                        for i in 0..inner {
                            let d = x[at(o, c, i)] - mu;
                            v += d * d;
                        }
                    }
                    mean[c] = mu;
                    var[c] = v / n;
                }
                let mom = T::cast(momentum);
                let unbias = n / (n - T::one());
                let updated = RunningMoments {
                    mean: running
                        .mean
                        .iter()
                        .zip(&mean)
                        .map(|(&r, &m)| (T::one() - mom) * r + mom * m)
                        .collect(),
                    var: running
                        .var
                        .iter()
                        .zip(&var)
                        .map(|(&r, &v)| (T::one() - mom) * r + mom * v * unbias)
                        .collect(),
                };
                (mean, var, Some(updated))
            }
            Mode::Eval => (running.mean.clone(), running.var.clone(), None),
        };

        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps_t).sqrt()).collect();
        let mut xhat = vec![T::zero(); x.len()];
        let mut out = vec![T::zero(); x.len()];
        let (gm, bt) = (gamma.data(), beta.data());
        for o in 0..outer {
            for c in 0..ch {
                for i in 0..inner {
                    let j = at(o, c, i);
                    let xh = (x[j] - mean[c]) * inv_std[c];
                    xhat[j] = xh;
                    out[j] = gm[c] * xh + bt[c];
                }
            }
        }

        let gamma_c = gamma.clone();
        let output = Tensor::from_op(
            "batch_norm",
            out,
            self.shape().to_vec(),
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |gy| {
                let gm = gamma_c.data();
                let mut gx = vec![T::zero(); gy.len()];
                let mut ggamma = vec![T::zero(); ch];
                let mut gbeta = vec![T::zero(); ch];
                let n = T::cast(count as f64);
                for c in 0..ch {
                    let (mut sum_g, mut sum_gx) = (T::zero(), T::zero());
                    for o in 0..outer {
                        for i in 0..inner {
                            let j = at(o, c, i);
                            sum_g += gy[j];
                            sum_gx += gy[j] * xhat[j];
                        }
                    }
                    gbeta[c] = sum_g;
                    ggamma[c] = sum_gx;
                    let k = gm[c] * inv_std[c];
                    for o in 0..outer {
                        for i in 0..inner {
                            let j = at(o, c, i);
                            gx[j] = match mode {
                                Mode::Train => k * (gy[j] - sum_g / n - xhat[j] * sum_gx / n),
                                Mode::Eval => k * gy[j],
                            };
                        }
                    }
                }
                vec![Some(gx), Some(ggamma), Some(gbeta)]
            }),
        )?;
        Ok(BatchNormOutput { output, updated })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(c: usize) -> Tensor<f64> {
        Tensor::full(&[c], 1.0).unwrap()
    }

    #[test]
    fn constant_input_normalizes_to_zero() {
        let x = Tensor::<f64>::full(&[4, 2, 3], 5.0).unwrap();
        let out = x
            .batch_norm(
                &ones(2),
                &Tensor::zeros(&[2]).unwrap(),
                &RunningMoments::fresh(2),
                Mode::Train,
                1,
                0.1,
                1e-5,
            )
            .unwrap();
        assert!(out.output.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_values_map_to_unit_signs() {
        let x = Tensor::<f64>::from_f64(&[1.0, 3.0], &[2, 1]).unwrap();
        let out = x
            .batch_norm(
                &ones(1),
                &Tensor::zeros(&[1]).unwrap(),
                &RunningMoments::fresh(1),
                Mode::Train,
                1,
                0.1,
                1e-12,
            )
            .unwrap();
        assert!((out.output.data()[0] + 1.0).abs() < 1e-9);
        assert!((out.output.data()[1] - 1.0).abs() < 1e-9);
        let up = out.updated.unwrap();
        // EMA with momentum 0.1 from (0, 1) toward mean 2, unbiased var 2
        assert!((up.mean[0] - 0.2).abs() < 1e-12);
        assert!((up.var[0] - (0.9 + 0.2)).abs() < 1e-12);
    }

    #[test]
    fn eval_mode_is_affine() {
        let x = Tensor::<f64>::from_f64(&[3.0], &[1, 1]).unwrap();
        let gamma = Tensor::from_f64(&[2.0], &[1]).unwrap();
        let beta = Tensor::from_f64(&[1.0], &[1]).unwrap();
        let out = x
            .batch_norm(
                &gamma,
                &beta,
                &RunningMoments::fresh(1),
                Mode::Eval,
                1,
                0.1,
                1e-5,
            )
            .unwrap();
        assert!((out.output.data()[0] - 7.0).abs() < 1e-4);
        assert!(out.updated.is_none());
    }

    #[test]
    fn train_mode_rejects_single_element() {
        let x = Tensor::<f64>::from_f64(&[3.0, 4.0], &[1, 2]).unwrap();
        let r = x.batch_norm(
            &ones(2),
            &Tensor::zeros(&[2]).unwrap(),
            &RunningMoments::fresh(2),
            Mode::Train,
            1,
            0.1,
            1e-5,
        );
        assert!(matches!(r, Err(TensorError::DegenerateBatch { .. })));
    }

    #[test]
    fn batch_statistics_are_standardized() {
        let x = Tensor::<f64>::from_f64(&[1., 7., 2., -3., 4., 9., 0.5, 2.], &[2, 2, 2]).unwrap();
        let out = x
            .batch_norm(
                &ones(2),
                &Tensor::zeros(&[2]).unwrap(),
                &RunningMoments::fresh(2),
                Mode::Train,
                1,
                0.1,
                0.0,
            )
            .unwrap();
        let y = out.output.data();
        for c in 0..2 {
            let vals: Vec<f64> = (0..2)
                .flat_map(|o| (0..2).map(move |i| (o * 2 + c) * 2 + i))
                .map(|j| y[j])
                .collect();
            let mean = vals.iter().sum::<f64>() / 4.0;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }
}
