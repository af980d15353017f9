//! Clip-level photometric and flip augmentation. One draw per clip, shared
//! by all of its frames.

use gradtape::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::clips::{Frame, VideoClip};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub flip: bool,
    pub brightness: f32,
    pub contrast: f32,
}

impl AugmentDraw {
    pub fn identity() -> Self {
        AugmentDraw {
            flip: false,
            brightness: 1.0,
            contrast: 1.0,
        }
    }

    pub fn sample(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AugmentDraw {
            flip: rng.random_bool(0.5),
            brightness: rng.random_range(0.8..=1.2),
            contrast: rng.random_range(0.8..=1.2),
        }
    }

    /// `clamp(((x * brightness) - 0.5) * contrast + 0.5, 0, 1)`; unit factors are skipped.
    pub fn pixel(&self, x: f32) -> f32 {
        let mut y = x;
        if self.brightness != 1.0 {
            y *= self.brightness;
        }
        if self.contrast != 1.0 {
            y = (y - 0.5) * self.contrast + 0.5;
        }
        y.clamp(0.0, 1.0)
    }

    pub fn apply(&self, clip: &VideoClip) -> VideoClip {
        if *self == AugmentDraw::identity() {
            return clip.clone();
        }
        let frames = clip
            .frames
            .iter()
            .map(|f| {
                let (h, w) = (f.image.shape()[1], f.image.shape()[2]);
                let src = f.image.data();
                let mut out = vec![0f32; src.len()];
                for c in 0..3 {
                    for y in 0..h {
                        let row = (c * h + y) * w;
                        for x in 0..w {
                            let sx = if self.flip { w - 1 - x } else { x };
                            out[row + x] = self.pixel(src[row + sx]);
                        }
                    }
                }
                Frame {
                    image: Tensor::new(out, f.image.shape()).expect("same shape"),
                    video_id: f.video_id.clone(),
                    index: f.index,
                }
            })
            .collect();
        VideoClip {
            frames,
            label: clip.label.clone(),
            t: clip.t,
        }
    }
}

pub fn augment(clip: &VideoClip, seed: u64) -> VideoClip {
    AugmentDraw::sample(seed).apply(clip)
}
