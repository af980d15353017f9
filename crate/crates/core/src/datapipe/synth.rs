//! Procedural stand-in videos with one active triplet per frame.
//!
//! Each segment draws a triplet and renders a square blob over a dark
//! canvas. The instrument picks the blob's shape, the target picks the grey
//! level of a band along the bottom, and the verb picks the blob colour.
//! Temporally coded verbs share a two-colour palette and differ only in how
//! the colour evolves: period 0 holds one colour for the whole segment,
//! period `p` toggles every `p` frames. The starting colour is a fair coin,
//! so a single frame of any temporally coded verb shows each palette colour
//! with probability one half.

use std::collections::BTreeSet;
use std::sync::Arc;

use gradtape::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::clips::Frame;
use super::dataset::{Dataset, Video};
use crate::error::{toml_error, Error, Result};
use crate::labels::LabelVector;
use crate::taxonomy::{TripletTaxonomy, NUM_INSTRUMENTS, NUM_TRIPLETS, NUM_VERBS};

const BACKGROUND: [u8; 3] = [40, 40, 40];
const TEMPORAL_PALETTE: [[u8; 3]; 2] = [[220, 40, 40], [40, 220, 40]];
const STATIC_PALETTE: [[u8; 3]; NUM_VERBS] = [
    [40, 40, 220],
    [220, 220, 40],
    [220, 40, 220],
    [40, 220, 220],
    [230, 230, 230],
    [230, 140, 30],
    [130, 40, 200],
    [30, 140, 140],
    [240, 150, 180],
    [130, 130, 30],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerbCode {
    pub index: usize,
    /// 0 holds the starting colour; `p` toggles every `p` frames.
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    pub videos: usize,
    pub frames: usize,
    pub segment_min: usize,
    pub segment_max: usize,
    pub blob: usize,
    pub triplets: Vec<usize>,
    #[serde(rename = "verb")]
    pub verbs: Vec<VerbCode>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            height: 32,
            width: 48,
            videos: 2,
            frames: 100,
            segment_min: 10,
            segment_max: 20,
            blob: 8,
            // grasper/grasp, grasper/retract and grasper/dissect on the
            // gallbladder and liver, plus hook variants
            triplets: vec![1, 7, 17, 9, 19, 60, 63],
            verbs: vec![
                VerbCode {
                    index: 0,
                    period: 1,
                },
                VerbCode {
                    index: 1,
                    period: 0,
                },
            ],
        }
    }
}

impl SynthSpec {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let spec: SynthSpec =
            toml::from_str(text).map_err(|e| toml_error(source_name, text, &e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.height < 4 || self.width < 4 {
            return cfg(format!(
                "canvas {}x{} is smaller than 4x4",
                self.height, self.width
            ));
        }
        if self.blob < 3 || self.blob > self.height - self.height / 4 || self.blob > self.width {
            return cfg(format!("blob size {} does not fit the canvas", self.blob));
        }
        if self.videos == 0 || self.frames == 0 {
            return cfg("videos and frames must be positive".into());
        }
        if self.segment_min == 0 || self.segment_min > self.segment_max {
            return cfg(format!(
                "segment lengths {}..={} are invalid",
                self.segment_min, self.segment_max
            ));
        }
        if self.triplets.is_empty() {
            return cfg("no triplets listed".into());
        }
        if let Some(k) = self.triplets.iter().find(|&&k| k >= NUM_TRIPLETS) {
            return cfg(format!("triplet id {k} out of range"));
        }
        let mut seen = BTreeSet::new();
        for c in &self.verbs {
            if c.index >= NUM_VERBS || !seen.insert(c.index) {
                return cfg(format!(
                    "verb code for {} is out of range or repeated",
                    c.index
                ));
            }
        }
        let periods: BTreeSet<usize> = self.verbs.iter().map(|c| c.period).collect();
        if self.verbs.len() < 2 || periods.len() < 2 {
            return cfg(
                "at least two temporally coded verbs with distinct periods are required".into(),
            );
        }
        Ok(())
    }

    fn period(&self, verb: usize) -> Option<usize> {
        self.verbs
            .iter()
            .find(|c| c.index == verb)
            .map(|c| c.period)
    }
}

/// Whether cell `(dy, dx)` of a `b`-sided blob is painted for `instrument`.
fn shape_mask(instrument: usize, dy: usize, dx: usize, b: usize) -> bool {
    debug_assert!(instrument < NUM_INSTRUMENTS);
    let s = (b / 4).max(1);
    let edge = |v: usize| v < s || v + s >= b;
    let mid = |v: usize| 2 * v + s >= b && 2 * v < b + s;
    match instrument {
        0 => true,
        1 => edge(dy) || edge(dx),
        2 => (dy / s).is_multiple_of(2),
        3 => (dx / s).is_multiple_of(2),
        4 => (dy / s + dx / s).is_multiple_of(2),
        _ => mid(dy) || mid(dx),
    }
}

struct Segment {
    triplet: usize,
    x: usize,
    y: usize,
    phase: usize,
    offset: usize,
}

fn render(spec: &SynthSpec, tax: &TripletTaxonomy, seg: &Segment, k: usize) -> Vec<f32> {
    let (h, w) = (spec.height, spec.width);
    let tr = tax.triplet(seg.triplet);
    let colour = match spec.period(tr.verb) {
        Some(0) => TEMPORAL_PALETTE[seg.phase],
        Some(p) => TEMPORAL_PALETTE[((k + seg.offset) / p + seg.phase) % 2],
        None => STATIC_PALETTE[tr.verb],
    };
    let band = h - h / 4;
    let level = 60 + ((tr.target * 7) % 15) as u8 * 12;
    let mut out = vec![0f32; 3 * h * w];
    for y in 0..h {
        for x in 0..w {
            let inside =
                (seg.y..seg.y + spec.blob).contains(&y) && (seg.x..seg.x + spec.blob).contains(&x);
            let px = if inside && shape_mask(tr.instrument, y - seg.y, x - seg.x, spec.blob) {
                colour
            } else if y >= band {
                [level; 3]
            } else {
                BACKGROUND
            };
            for c in 0..3 {
                out[(c * h + y) * w + x] = f32::from(px[c]) / 255.0;
            }
        }
    }
    out
}

/// Deterministic in `(spec, seed)`.
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let tax = Arc::new(TripletTaxonomy::default());
    let (h, w) = (spec.height, spec.width);
    let band = h - h / 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut videos = Vec::with_capacity(spec.videos);
    for vi in 0..spec.videos {
        let id: Arc<str> = Arc::from(format!("syn{seed}-v{vi:02}"));
        let mut frames = Vec::with_capacity(spec.frames);
        let mut labels = Vec::with_capacity(spec.frames);
        while frames.len() < spec.frames {
            let len = rng.random_range(spec.segment_min..=spec.segment_max);
            let triplet = spec.triplets[rng.random_range(0..spec.triplets.len())];
            let period = spec.period(tax.triplet(triplet).verb).unwrap_or(0);
            let seg = Segment {
                triplet,
                x: rng.random_range(0..=w - spec.blob),
                y: rng.random_range(0..=band - spec.blob),
                phase: rng.random_range(0..2),
                offset: if period > 0 {
                    rng.random_range(0..period)
                } else {
                    0
                },
            };
            let label = LabelVector::from_active(&[triplet], &tax)?;
            for k in 0..len.min(spec.frames - frames.len()) {
                let index = frames.len();
                frames.push(Frame {
                    image: Tensor::new(render(spec, &tax, &seg, k), &[3, h, w])?,
                    video_id: id.clone(),
                    index,
                });
                labels.push(label.clone());
            }
        }
        videos.push(Video { id, frames, labels });
    }
    Dataset::new(tax, videos, (h, w))
}
