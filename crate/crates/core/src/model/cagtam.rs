//! Instrument-guided attention for the verb and target branches and the
//! temporal attention module (TAM) that gates and sums per-frame class maps.

use gradtape::nn::{BatchNorm, Conv1d, Conv2d};
use gradtape::{scaled_dot_product_attention, Ctx, ParamStore, Real, Tensor, TensorError};
use rand::Rng;

use super::backbone::{per_frame, FrameFeatures, InstrumentCam};
use super::config::{FusionPosition, ModelConfig, TamConfig, TamTarget};
use crate::error::{Error, Result};
use crate::taxonomy::{NUM_INSTRUMENTS, NUM_TARGETS, NUM_VERBS};

/// Single guided dot-product attention: queries from frame features, keys
/// from the instrument maps, values from a 1x1 class projection.
#[derive(Debug, Clone)]
pub struct GuidedBranch {
    pub value: Conv2d,
    pub query: Conv2d,
    pub key: Conv2d,
    pub out: Conv2d,
    pub classes: usize,
}

impl GuidedBranch {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        in_ch: usize,
        classes: usize,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(GuidedBranch {
            value: Conv2d::new(
                store,
                &format!("{name}.value"),
                in_ch,
                classes,
                1,
                1,
                0,
                rng,
            )?,
            query: Conv2d::new(store, &format!("{name}.query"), in_ch, dim, 1, 1, 0, rng)?,
            key: Conv2d::new(
                store,
                &format!("{name}.key"),
                NUM_INSTRUMENTS,
                dim,
                1,
                1,
                0,
                rng,
            )?,
            out: Conv2d::new(
                store,
                &format!("{name}.out"),
                classes,
                classes,
                1,
                1,
                0,
                rng,
            )?,
            classes,
        })
    }

    /// `[B, d, h, w]` to `[B, classes, h, w]`.
    pub fn project_value<T: Real>(
        &self,
        store: &ParamStore<T>,
        x: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        Ok(self.value.forward(store, x)?)
    }

    /// `value + out(attention(q(x), k(cam), value))` over spatial positions.
    /// `x` is `[B, d, h, w]`, `cam` is `[B, 6, h, w]`, `value` is `[B, classes, h, w]`.
    pub fn attend<T: Real>(
        &self,
        store: &ParamStore<T>,
        x: &Tensor<T>,
        cam: &Tensor<T>,
        value: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let (xs, cs, vs) = (x.shape(), cam.shape(), value.shape());
        if xs.len() != 4
            || cs.len() != 4
            || vs.len() != 4
            || xs[0] != cs[0]
            || xs[2..] != cs[2..]
            || xs[2..] != vs[2..]
        {
            return Err(TensorError::dim(
                "guided_attention",
                format!("features {xs:?}, instrument maps {cs:?} and values {vs:?} disagree"),
            )
            .into());
        }
        let (b, h, w) = (xs[0], xs[2], xs[3]);
        let tokens = |t: Tensor<T>| -> Result<Tensor<T>> {
            let c = t.shape()[1];
            Ok(t.reshape(&[b, c, h * w])?.permute(&[0, 2, 1])?)
        };
        let q = tokens(self.query.forward(store, x)?)?;
        let k = tokens(self.key.forward(store, cam)?)?;
        let v = tokens(value.clone())?;
        let (o, _) = scaled_dot_product_attention(&q, &k, &v)?;
        let o = o.permute(&[0, 2, 1])?.reshape(&[b, self.classes, h, w])?;
        Ok(value.add(&self.out.forward(store, &o)?)?)
    }

    /// Unfused branch output for every frame of `[b, m, d, h, w]` features.
    pub fn attend_frames<T: Real>(
        &self,
        store: &ParamStore<T>,
        features: &Tensor<T>,
        cam: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        let s = cam.shape().to_vec();
        let cam_flat = cam.reshape(&[s[0] * s[1], s[2], s[3], s[4]])?;
        per_frame(features, |x| {
            let v = self.project_value(store, x)?;
            self.attend(store, x, &cam_flat, &v)
        })
    }
}

/// Gate pre-activations: temporal convolution over pooled class scores, then
/// batch normalization over the class channel.
#[derive(Debug, Clone)]
pub struct Tam {
    pub conv: Conv1d,
    pub bn: BatchNorm,
}

impl Tam {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        classes: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if kernel.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "tam kernel must be odd, got {kernel}"
            )));
        }
        Ok(Tam {
            conv: Conv1d::new(
                store,
                &format!("{name}.conv"),
                classes,
                classes,
                kernel,
                rng,
            )?,
            bn: BatchNorm::new(store, &format!("{name}.bn"), classes, 1)?,
        })
    }

    /// `[b, m, c, h, w]` maps to `[b, m, c]` gates in `(0, 1)`.
    pub fn gate<T: Real>(
        &self,
        store: &ParamStore<T>,
        f: &Tensor<T>,
        ctx: &mut Ctx<T>,
    ) -> Result<Tensor<T>> {
        if f.rank() != 5 {
            return Err(TensorError::dim(
                "tam_gate",
                format!("expected [b, m, c, h, w], got {:?}", f.shape()),
            )
            .into());
        }
        let pooled = f.global_avg_pool()?.permute(&[0, 2, 1])?;
        let z = self.conv.forward(store, &pooled)?;
        let z = self.bn.forward(store, &z, ctx)?;
        Ok(z.sigmoid().permute(&[0, 2, 1])?)
    }
}

fn broadcast_gates<T: Real>(f: &Tensor<T>, w: &Tensor<T>) -> Result<Tensor<T>> {
    let fs = f.shape();
    if fs.len() != 5 || w.shape() != &fs[..3] {
        return Err(TensorError::dim(
            "tam_fuse",
            format!("maps {fs:?} and gates {:?} disagree", w.shape()),
        )
        .into());
    }
    Ok(w.reshape(&[fs[0], fs[1], fs[2], 1, 1])?.broadcast_to(fs)?)
}

/// Per-frame gating without temporal summation: `w_i * F_i`.
pub fn tam_scale<T: Real>(f: &Tensor<T>, w: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(f.mul(&broadcast_gates(f, w)?)?)
}

/// `sum_i w_i * F_i` over the clip axis: `[b, m, c, h, w]` and `[b, m, c]` to `[b, c, h, w]`.
pub fn tam_fuse<T: Real>(f: &Tensor<T>, w: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(tam_scale(f, w)?.sum_axis(1)?)
}

/// Class maps for the current step and their spatial mean.
#[derive(Debug, Clone)]
pub struct Fused<T: Real> {
    /// `[b, c, h, w]`
    pub map: Tensor<T>,
    /// `[b, c]`
    pub logits: Tensor<T>,
}

impl<T: Real> Fused<T> {
    pub fn from_map(map: Tensor<T>) -> Result<Self> {
        let logits = map.global_avg_pool()?;
        Ok(Fused { map, logits })
    }
}

/// One or two stacked TAM layers. With two, the first gates each frame
/// without summing; its output passes a rectifier and batch normalization
/// over classes before the second layer gates and sums.
#[derive(Debug, Clone)]
pub struct TamBlock {
    pub first: Tam,
    pub stacked: Option<(BatchNorm, Tam)>,
}

impl TamBlock {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        classes: usize,
        cfg: &TamConfig,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let first = Tam::new(store, &format!("{name}.tam0"), classes, cfg.kernel, rng)?;
        let stacked = if cfg.layers == 2 {
            Some((
                BatchNorm::new(store, &format!("{name}.mid_bn"), classes, 2)?,
                Tam::new(store, &format!("{name}.tam1"), classes, cfg.kernel, rng)?,
            ))
        } else {
            None
        };
        Ok(TamBlock { first, stacked })
    }

    pub fn apply<T: Real>(
        &self,
        store: &ParamStore<T>,
        f: &Tensor<T>,
        ctx: &mut Ctx<T>,
    ) -> Result<Fused<T>> {
        let w = self.first.gate(store, f, ctx)?;
        let map = match &self.stacked {
            None => tam_fuse(f, &w)?,
            Some((bn, second)) => {
                let g = bn.forward(store, &tam_scale(f, &w)?.relu(), ctx)?;
                let w2 = second.gate(store, &g, ctx)?;
                tam_fuse(&g, &w2)?
            }
        };
        Fused::from_map(map)
    }
}

#[derive(Debug, Clone)]
pub struct CagtamOutput<T: Real> {
    pub verb: Fused<T>,
    pub target: Fused<T>,
    pub instrument: Fused<T>,
}

#[derive(Debug, Clone)]
pub struct Cagtam {
    pub verb: GuidedBranch,
    pub target: GuidedBranch,
    pub verb_tam: Option<TamBlock>,
    pub instrument_tam: Option<TamBlock>,
    pub target_tam: Option<TamBlock>,
    pub position: FusionPosition,
}

impl Cagtam {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        cfg: &ModelConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let d = cfg.backbone_channels[3];
        let tam = &cfg.tam;
        let verb = GuidedBranch::new(store, "cagtam.verb", d, NUM_VERBS, cfg.attention_dim, rng)?;
        let target = GuidedBranch::new(
            store,
            "cagtam.target",
            d,
            NUM_TARGETS,
            cfg.attention_dim,
            rng,
        )?;
        let block = |store: &mut ParamStore<T>, rng: &mut R, t: TamTarget, name: &str, c: usize| {
            if tam.has(t) {
                TamBlock::new(store, name, c, tam, rng).map(Some)
            } else {
                Ok(None)
            }
        };
        Ok(Cagtam {
            verb,
            target,
            verb_tam: block(store, rng, TamTarget::Verb, "cagtam.verb", NUM_VERBS)?,
            instrument_tam: block(
                store,
                rng,
                TamTarget::Instrument,
                "cagtam.instrument",
                NUM_INSTRUMENTS,
            )?,
            target_tam: block(store, rng, TamTarget::Target, "cagtam.target", NUM_TARGETS)?,
            position: tam.position,
        })
    }

    fn branch<T: Real>(
        &self,
        store: &ParamStore<T>,
        branch: &GuidedBranch,
        tam: Option<&TamBlock>,
        features: &Tensor<T>,
        cam: &Tensor<T>,
        ctx: &mut Ctx<T>,
    ) -> Result<Fused<T>> {
        let m = features.shape()[1];
        let x_last = features.select(1, m - 1)?;
        let cam_last = cam.select(1, m - 1)?;
        match (tam, self.position) {
            (None, _) => {
                let v = branch.project_value(store, &x_last)?;
                Fused::from_map(branch.attend(store, &x_last, &cam_last, &v)?)
            }
            (Some(tam), FusionPosition::Late) => {
                tam.apply(store, &branch.attend_frames(store, features, cam)?, ctx)
            }
            (Some(tam), FusionPosition::Early) => {
                let values = per_frame(features, |x| branch.project_value(store, x))?;
                let fused = tam.apply(store, &values, ctx)?;
                Fused::from_map(branch.attend(store, &x_last, &cam_last, &fused.map)?)
            }
        }
    }

    pub fn forward<T: Real>(
        &self,
        store: &ParamStore<T>,
        features: &FrameFeatures<T>,
        cam: &InstrumentCam<T>,
        ctx: &mut Ctx<T>,
    ) -> Result<CagtamOutput<T>> {
        let f = &features.features;
        let c = &cam.cam;
        if f.rank() != 5
            || c.rank() != 5
            || f.shape()[..2] != c.shape()[..2]
            || f.shape()[3..] != c.shape()[3..]
        {
            return Err(TensorError::dim(
                "cagtam",
                format!(
                    "features {:?} and instrument maps {:?} disagree",
                    f.shape(),
                    c.shape()
                ),
            )
            .into());
        }
        let verb = self.branch(store, &self.verb, self.verb_tam.as_ref(), f, c, ctx)?;
        let target = self.branch(store, &self.target, self.target_tam.as_ref(), f, c, ctx)?;
        let instrument = match &self.instrument_tam {
            Some(tam) => tam.apply(store, c, ctx)?,
            None => Fused::from_map(c.select(1, c.shape()[1] - 1)?)?,
        };
        Ok(CagtamOutput {
            verb,
            target,
            instrument,
        })
    }
}
