mod common;

use proptest::prelude::*;
use triplet_core::datapipe::{
    augment, clip_indices, make_clips, stack_clips, AugmentDraw, BatchSampler,
};

#[test]
fn clips_match_clamped_window_oracle() {
    let n = common::clip_oracle().unwrap();
    assert_eq!(n, 4 * (1..=50).sum::<usize>());
}

#[test]
fn clip_size_zero_and_ragged_input_rejected() {
    let (frames, labels) = common::tagged_frames(4);
    assert!(make_clips(&frames, &labels, 0).is_err());
    assert!(make_clips(&frames, &labels[..3], 2).is_err());
    assert!(make_clips(&[], &[], 2).is_err());
}

proptest! {
    #[test]
    fn windows_are_causal_and_end_at_t(t in 0usize..200, m in 1usize..12) {
        let idx = clip_indices(t, m);
        prop_assert_eq!(idx.len(), m);
        prop_assert_eq!(*idx.last().unwrap(), t);
        prop_assert!(idx.windows(2).all(|w| w[0] <= w[1] && w[1] - w[0] <= 1));
        prop_assert!(idx.iter().all(|&i| i <= t));
    }

    #[test]
    fn labels_follow_the_last_frame(n in 1usize..30, m in 1usize..9) {
        let (frames, labels) = common::tagged_frames(n);
        for c in make_clips(&frames, &labels, m).unwrap() {
            prop_assert_eq!(c.frames.last().unwrap().index, c.t);
            prop_assert_eq!(&c.label, &labels[c.t]);
        }
    }

    #[test]
    fn augmentation_keeps_structure_and_range(seed in any::<u64>(), t in 0usize..10) {
        let data = triplet_core::datapipe::synth_generate(&common::bench_spec(1, 10), 3).unwrap();
        let clip = data.videos[0].clip(t, 4);
        let out = augment(&clip, seed);
        prop_assert_eq!(out.t, clip.t);
        prop_assert_eq!(&out.label, &clip.label);
        prop_assert_eq!(out.frames.len(), clip.frames.len());
        for (a, b) in out.frames.iter().zip(&clip.frames) {
            prop_assert_eq!(a.index, b.index);
            prop_assert_eq!(a.image.shape(), b.image.shape());
            prop_assert!(a.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        // one draw per clip: repeated source frames stay identical
        for j in 1..out.frames.len() {
            if clip.frames[j].index == clip.frames[0].index {
                prop_assert_eq!(out.frames[j].image.data(), out.frames[0].image.data());
            }
        }
        let still = AugmentDraw::identity().apply(&clip);
        let (a, b) = (stack_clips(&[still]).unwrap(), stack_clips(&[clip]).unwrap());
        prop_assert_eq!(a.data(), b.data());
    }

    #[test]
    fn epochs_visit_every_clip_once(seed in 0u64..50, batch in 1usize..9, epoch in 0u64..4) {
        let data = triplet_core::datapipe::synth_generate(&common::bench_spec(2, 13), seed).unwrap();
        let s = BatchSampler::new(&data, 3, batch, seed).unwrap();
        let batches = s.batch_refs(epoch);
        prop_assert!(batches.iter().all(|b| !b.is_empty() && b.len() <= batch));
        let mut all: Vec<_> = batches.into_iter().flatten().map(|r| format!("{r:?}")).collect();
        prop_assert_eq!(all.len(), 26);
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), 26);
    }
}
