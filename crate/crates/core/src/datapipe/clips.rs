use std::sync::Arc;

use gradtape::Tensor;

use crate::error::{Error, Result};
use crate::labels::LabelVector;

#[derive(Debug, Clone)]
pub struct Frame {
    /// `[3, h, w]`, values in `[0, 1]`
    pub image: Tensor<f32>,
    pub video_id: Arc<str>,
    pub index: usize,
}

/// `m` frames ending at position `t`; the label belongs to the last frame.
#[derive(Debug, Clone)]
pub struct VideoClip {
    pub frames: Vec<Frame>,
    pub label: LabelVector,
    pub t: usize,
}

/// Positions of the frames in the clip ending at `t`: `max(0, t - m + 1 + j)`.
pub fn clip_indices(t: usize, m: usize) -> Vec<usize> {
    (0..m).map(|j| (t + j + 1).saturating_sub(m)).collect()
}

pub(crate) fn clip_at(frames: &[Frame], labels: &[LabelVector], t: usize, m: usize) -> VideoClip {
    VideoClip {
        frames: clip_indices(t, m)
            .into_iter()
            .map(|i| frames[i].clone())
            .collect(),
        label: labels[t].clone(),
        t,
    }
}

/// One clip per position `t in 0..N`; windows before `m - 1` repeat frame 0.
pub fn make_clips(frames: &[Frame], labels: &[LabelVector], m: usize) -> Result<Vec<VideoClip>> {
    if m < 1 {
        return Err(Error::Config("clip size must be at least 1".into()));
    }
    if frames.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} frames but {} labels",
            frames.len(),
            labels.len()
        )));
    }
    if frames.is_empty() {
        return Err(Error::Data("video has no frames".into()));
    }
    Ok((0..frames.len())
        .map(|t| clip_at(frames, labels, t, m))
        .collect())
}

/// Stacks clips into the model input layout `[b, 3, m, h, w]`.
pub fn stack_clips(clips: &[VideoClip]) -> Result<Tensor<f32>> {
    let first = clips
        .first()
        .ok_or_else(|| Error::Data("empty batch".into()))?;
    let m = first.frames.len();
    let shape = first.frames[0].image.shape().to_vec();
    if shape.len() != 3 || shape[0] != 3 {
        return Err(Error::Data(format!(
            "frame image has shape {shape:?}, expected [3, h, w]"
        )));
    }
    let hw = shape[1] * shape[2];
    let mut data = vec![0f32; clips.len() * 3 * m * hw];
    for (b, clip) in clips.iter().enumerate() {
        if clip.frames.len() != m {
            return Err(Error::Data(format!(
                "clip sizes differ: {} vs {m}",
                clip.frames.len()
            )));
        }
        for (j, f) in clip.frames.iter().enumerate() {
            if f.image.shape() != shape.as_slice() {
                return Err(Error::Data(format!(
                    "frame shapes differ: {:?} vs {shape:?}",
                    f.image.shape()
                )));
            }
            let src = f.image.data();
            for c in 0..3 {
                let dst = ((b * 3 + c) * m + j) * hw;
                data[dst..dst + hw].copy_from_slice(&src[c * hw..(c + 1) * hw]);
            }
        }
    }
    Ok(Tensor::new(data, &[clips.len(), 3, m, shape[1], shape[2]])?)
}
