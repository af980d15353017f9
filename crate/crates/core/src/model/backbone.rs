//! Per-frame feature extractor, instrument localization head and the scene
//! bottleneck.

use gradtape::nn::{BatchNorm, Conv2d};
use gradtape::{Ctx, ParamStore, Real, Tensor, TensorError};
use rand::Rng;

use super::config::ModelConfig;
use crate::error::Result;
use crate::taxonomy::NUM_INSTRUMENTS;

/// `[b, m, d, h', w']`
#[derive(Debug, Clone)]
pub struct FrameFeatures<T: Real> {
    pub features: Tensor<T>,
}

/// `cam` is `[b, m, 6, h', w']`; `logits` is the spatial mean of the last frame's map.
#[derive(Debug, Clone)]
pub struct InstrumentCam<T: Real> {
    pub cam: Tensor<T>,
    pub logits: Tensor<T>,
}

/// `[b, d', h', w']`, computed from the last frame only.
#[derive(Debug, Clone)]
pub struct SceneFeatures<T: Real> {
    pub scene: Tensor<T>,
}

fn frames_flat<T: Real>(x: &Tensor<T>) -> Result<(Tensor<T>, [usize; 5])> {
    let s = x.shape();
    if s.len() != 5 {
        return Err(
            TensorError::dim("frames", format!("expected [b, m, c, h, w], got {s:?}")).into(),
        );
    }
    let dims = [s[0], s[1], s[2], s[3], s[4]];
    Ok((x.reshape(&[s[0] * s[1], s[2], s[3], s[4]])?, dims))
}

/// Applies `f` to every frame of a `[b, m, c, h, w]` tensor with shared weights.
pub(crate) fn per_frame<T: Real>(
    x: &Tensor<T>,
    f: impl FnOnce(&Tensor<T>) -> Result<Tensor<T>>,
) -> Result<Tensor<T>> {
    let (flat, [b, m, ..]) = frames_flat(x)?;
    let y = f(&flat)?;
    let ys = y.shape().to_vec();
    let mut out = vec![b, m];
    out.extend_from_slice(&ys[1..]);
    Ok(y.reshape(&out)?)
}

#[derive(Debug, Clone)]
pub struct Backbone {
    pub stages: Vec<(Conv2d, BatchNorm)>,
    pub clip_size: usize,
    pub resolution: [usize; 2],
}

impl Backbone {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        cfg: &ModelConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mut stages = Vec::with_capacity(4);
        let mut c_in = 3;
        for (i, &c) in cfg.backbone_channels.iter().enumerate() {
            let conv = Conv2d::new(store, &format!("backbone.stage{i}"), c_in, c, 3, 2, 1, rng)?;
            let norm = BatchNorm::new(store, &format!("backbone.stage{i}.bn"), c, 1)?;
            stages.push((conv, norm));
            c_in = c;
        }
        Ok(Backbone {
            stages,
            clip_size: cfg.clip_size,
            resolution: cfg.resolution,
        })
    }

    /// `clip` is `[b, 3, m, h, w]`; frames mix only through training-mode batch statistics.
    pub fn extract_features<T: Real>(
        &self,
        store: &ParamStore<T>,
        clip: &Tensor<T>,
        ctx: &mut Ctx<T>,
    ) -> Result<FrameFeatures<T>> {
        let s = clip.shape();
        let expected = [3, self.clip_size, self.resolution[0], self.resolution[1]];
        if s.len() != 5 || s[1..] != expected {
            return Err(TensorError::dim(
                "extract_features",
                format!(
                    "input {s:?} does not match [b, 3, {}, {}, {}]",
                    expected[1], expected[2], expected[3]
                ),
            )
            .into());
        }
        let frames = clip.permute(&[0, 2, 1, 3, 4])?;
        let features = per_frame(&frames, |x| {
            let mut h = x.clone();
            for (conv, norm) in &self.stages {
                h = norm.forward(store, &conv.forward(store, &h)?, ctx)?.relu();
            }
            Ok(h)
        })?;
        Ok(FrameFeatures { features })
    }
}

/// Two 3x3 convolutions and a 1x1 class mapping to instrument activation maps.
#[derive(Debug, Clone)]
pub struct WslHead {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub classifier: Conv2d,
}

impl WslHead {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        cfg: &ModelConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let d = cfg.backbone_channels[3];
        let c = cfg.wsl_channels;
        Ok(WslHead {
            conv1: Conv2d::new(store, "wsl.conv1", d, c, 3, 1, 1, rng)?,
            conv2: Conv2d::new(store, "wsl.conv2", c, c, 3, 1, 1, rng)?,
            classifier: Conv2d::new(store, "wsl.classifier", c, NUM_INSTRUMENTS, 1, 1, 0, rng)?,
        })
    }

    pub fn forward<T: Real>(
        &self,
        store: &ParamStore<T>,
        f: &FrameFeatures<T>,
    ) -> Result<InstrumentCam<T>> {
        let cam = per_frame(&f.features, |x| {
            let h = self.conv1.forward(store, x)?.relu();
            let h = self.conv2.forward(store, &h)?.relu();
            Ok(self.classifier.forward(store, &h)?)
        })?;
        cam_from_maps(cam)
    }
}

/// Wraps `[b, m, 6, h, w]` maps, pooling the last frame into logits.
pub fn cam_from_maps<T: Real>(cam: Tensor<T>) -> Result<InstrumentCam<T>> {
    let m = cam.shape()[1];
    let logits = cam.select(1, m - 1)?.global_avg_pool()?;
    Ok(InstrumentCam { cam, logits })
}

/// 1x1 projection of the current frame's features.
#[derive(Debug, Clone)]
pub struct SceneBottleneck {
    pub proj: Conv2d,
}

impl SceneBottleneck {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        cfg: &ModelConfig,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(SceneBottleneck {
            proj: Conv2d::new(
                store,
                "scene.proj",
                cfg.backbone_channels[3],
                cfg.scene_channels,
                1,
                1,
                0,
                rng,
            )?,
        })
    }

    pub fn forward<T: Real>(
        &self,
        store: &ParamStore<T>,
        f: &FrameFeatures<T>,
    ) -> Result<SceneFeatures<T>> {
        let m = f.features.shape()[1];
        let last = f.features.select(1, m - 1)?;
        Ok(SceneFeatures {
            scene: self.proj.forward(store, &last)?,
        })
    }
}
