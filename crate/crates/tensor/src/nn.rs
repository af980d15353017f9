//! Parameterized layers. Each layer only holds ids into a [`ParamStore`];
//! the store owns the values.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, TensorError};
use crate::ops::norm::RunningMoments;
use crate::param::{BufferId, Ctx, ParamId, ParamStore};
use crate::real::Real;
use crate::tensor::Tensor;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

fn normal_init<T: Real, R: Rng + ?Sized>(n: usize, std: f64, rng: &mut R) -> Vec<T> {
    let d = Normal::new(0.0, std).expect("positive std");
    (0..n).map(|_| T::cast(d.sample(rng))).collect()
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let fan_in = in_ch * kernel * kernel;
        let w = normal_init(out_ch * fan_in, (2.0 / fan_in as f64).sqrt(), rng);
        let weight = store.add_param(
            &format!("{name}.weight"),
            w,
            &[out_ch, in_ch, kernel, kernel],
        )?;
        let bias = store.add_param(&format!("{name}.bias"), vec![T::zero(); out_ch], &[out_ch])?;
        Ok(Conv2d {
            weight,
            bias,
            stride,
            padding,
        })
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.conv2d(
            store.get(self.weight),
            Some(store.get(self.bias)),
            self.stride,
            self.padding,
        )
    }
}

/// Temporal convolution with "same" padding; the kernel length must be odd.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub padding: usize,
}

impl Conv1d {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(TensorError::Config(format!(
                "conv1d kernel must be odd, got {kernel}"
            )));
        }
        let fan_in = in_ch * kernel;
        let w = normal_init(out_ch * fan_in, (1.0 / fan_in as f64).sqrt(), rng);
        let weight = store.add_param(&format!("{name}.weight"), w, &[out_ch, in_ch, kernel])?;
        let bias = store.add_param(&format!("{name}.bias"), vec![T::zero(); out_ch], &[out_ch])?;
        Ok(Conv1d {
            weight,
            bias,
            padding: kernel / 2,
        })
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.conv1d(
            store.get(self.weight),
            Some(store.get(self.bias)),
            self.padding,
        )
    }
}

/// Affine map over the last axis; weight is stored `[in, out]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let w = normal_init(in_dim * out_dim, (1.0 / in_dim as f64).sqrt(), rng);
        let weight = store.add_param(&format!("{name}.weight"), w, &[in_dim, out_dim])?;
        let bias = store.add_param(
            &format!("{name}.bias"),
            vec![T::zero(); out_dim],
            &[out_dim],
        )?;
        Ok(Linear {
            weight,
            bias,
            in_dim,
            out_dim,
        })
    }

    pub fn forward<T: Real>(&self, store: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape();
        if *s.last().expect("rank >= 1") != self.in_dim {
            return Err(TensorError::dim(
                "linear",
                format!("input {s:?} does not end in {} features", self.in_dim),
            ));
        }
        let rows = x.numel() / self.in_dim;
        let y = x
            .reshape(&[rows, self.in_dim])?
            .matmul(store.get(self.weight))?;
        let b = store
            .get(self.bias)
            .reshape(&[1, self.out_dim])?
            .broadcast_to(&[rows, self.out_dim])?;
        let mut out_shape = s.to_vec();
        *out_shape.last_mut().expect("rank >= 1") = self.out_dim;
        y.add(&b)?.reshape(&out_shape)
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: BufferId,
    pub running_var: BufferId,
    pub channel_axis: usize,
}

impl BatchNorm {
    pub fn new<T: Real>(
        store: &mut ParamStore<T>,
        name: &str,
        channels: usize,
        channel_axis: usize,
    ) -> Result<Self> {
        let fresh = RunningMoments::<T>::fresh(channels);
        Ok(BatchNorm {
            gamma: store.add_param(
                &format!("{name}.gamma"),
                vec![T::one(); channels],
                &[channels],
            )?,
            beta: store.add_param(
                &format!("{name}.beta"),
                vec![T::zero(); channels],
                &[channels],
            )?,
            running_mean: store.add_buffer(
                &format!("{name}.running_mean"),
                fresh.mean,
                &[channels],
            )?,
            running_var: store.add_buffer(
                &format!("{name}.running_var"),
                fresh.var,
                &[channels],
            )?,
            channel_axis,
        })
    }

    pub fn forward<T: Real>(
        &self,
        store: &ParamStore<T>,
        x: &Tensor<T>,
        ctx: &mut Ctx<T>,
    ) -> Result<Tensor<T>> {
        let running = RunningMoments {
            mean: store.buffer(self.running_mean).to_vec(),
            var: store.buffer(self.running_var).to_vec(),
        };
        let out = x.batch_norm(
            store.get(self.gamma),
            store.get(self.beta),
            &running,
            ctx.mode,
            self.channel_axis,
            BN_MOMENTUM,
            BN_EPS,
        )?;
        if let Some(up) = out.updated {
            ctx.record(self.running_mean, up.mean);
            ctx.record(self.running_var, up.var);
        }
        Ok(out.output)
    }
}
