use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::clips::VideoClip;
use super::dataset::Dataset;
use crate::error::{Error, Result};

/// Position of a clip: video index within the dataset and last-frame position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClipRef {
    pub video: usize,
    pub t: usize,
}

/// Per-epoch permutation of every clip across all videos.
#[derive(Debug, Clone)]
pub struct BatchSampler<'a> {
    dataset: &'a Dataset,
    m: usize,
    batch: usize,
    seed: u64,
    refs: Vec<ClipRef>,
}

impl<'a> BatchSampler<'a> {
    pub fn new(dataset: &'a Dataset, m: usize, batch: usize, seed: u64) -> Result<Self> {
        if batch < 1 || m < 1 {
            return Err(Error::Config(format!(
                "batch {batch} and clip size {m} must be at least 1"
            )));
        }
        let refs: Vec<ClipRef> = dataset
            .videos
            .iter()
            .enumerate()
            .flat_map(|(vi, v)| (0..v.len()).map(move |t| ClipRef { video: vi, t }))
            .collect();
        if refs.is_empty() {
            return Err(Error::Config("dataset has no clips".into()));
        }
        Ok(BatchSampler {
            dataset,
            m,
            batch,
            seed,
            refs,
        })
    }

    pub fn num_clips(&self) -> usize {
        self.refs.len()
    }

    pub fn num_batches(&self) -> usize {
        self.refs.len().div_ceil(self.batch)
    }

    pub fn order(&self, epoch: u64) -> Vec<ClipRef> {
        let mut rng =
            ChaCha8Rng::seed_from_u64(self.seed ^ epoch.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut refs = self.refs.clone();
        refs.shuffle(&mut rng);
        refs
    }

    /// Batches of `batch` refs in epoch order; only the last may be short.
    pub fn batch_refs(&self, epoch: u64) -> Vec<Vec<ClipRef>> {
        self.order(epoch)
            .chunks(self.batch)
            .map(<[ClipRef]>::to_vec)
            .collect()
    }

    pub fn clip(&self, r: ClipRef) -> VideoClip {
        self.dataset.videos[r.video].clip(r.t, self.m)
    }

    pub fn epoch(&self, epoch: u64) -> impl Iterator<Item = Vec<VideoClip>> + '_ {
        self.batch_refs(epoch)
            .into_iter()
            .map(move |b| b.into_iter().map(|r| self.clip(r)).collect())
    }
}
