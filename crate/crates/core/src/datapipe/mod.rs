//! Causal clips, on-disk datasets, the synthetic generator, augmentation and
//! batch sampling.

pub mod augment;
pub mod clips;
pub mod dataset;
pub mod sampler;
pub mod split;
pub mod synth;

pub use augment::{augment, AugmentDraw};
pub use clips::{clip_indices, make_clips, stack_clips, Frame, VideoClip};
pub use dataset::{load_dataset, write_dataset, Dataset, Video};
pub use sampler::{BatchSampler, ClipRef};
pub use split::{Fold, SplitSpec};
pub use synth::{synth_generate, SynthSpec, VerbCode};
