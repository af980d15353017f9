//! Prediction log: one line per frame, `video,frame,s_0,...,s_99`.

use std::collections::{BTreeMap, HashMap};

use crate::datapipe::Dataset;
use crate::error::{Error, Result};
use crate::labels::LabelVector;
use crate::taxonomy::NUM_TRIPLETS;

#[derive(Debug, Clone, PartialEq)]
pub struct FramePrediction {
    pub frame: usize,
    pub scores: Vec<f64>,
    pub truth: LabelVector,
}

/// Frames are strictly increasing within each video.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionLog {
    videos: BTreeMap<String, Vec<FramePrediction>>,
}

impl PredictionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, video: &str, p: FramePrediction) -> Result<()> {
        if p.scores.len() != NUM_TRIPLETS {
            return Err(Error::Data(format!(
                "video {video} frame {}: {} scores",
                p.frame,
                p.scores.len()
            )));
        }
        let seq = self.videos.entry(video.to_string()).or_default();
        if let Some(last) = seq.last() {
            if p.frame <= last.frame {
                return Err(Error::Data(format!(
                    "video {video}: frame {} does not follow {}",
                    p.frame, last.frame
                )));
            }
        }
        seq.push(p);
        Ok(())
    }

    /// Adds a video whose frames have not been seen; the frames may arrive
    /// in any order.
    pub fn insert_video(&mut self, video: &str, mut frames: Vec<FramePrediction>) -> Result<()> {
        if self.videos.contains_key(video) {
            return Err(Error::Data(format!("video {video} logged twice")));
        }
        frames.sort_by_key(|p| p.frame);
        for p in frames {
            self.push(video, p)?;
        }
        self.videos.entry(video.to_string()).or_default();
        Ok(())
    }

    pub fn videos(&self) -> impl Iterator<Item = (&str, &[FramePrediction])> {
        self.videos.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn num_videos(&self) -> usize {
        self.videos.len()
    }

    pub fn num_records(&self) -> usize {
        self.videos.values().map(Vec::len).sum()
    }

    /// Scores use the shortest text that parses back to the same value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (vid, seq) in &self.videos {
            for p in seq {
                out.push_str(vid);
                out.push(',');
                out.push_str(&p.frame.to_string());
                for s in &p.scores {
                    out.push(',');
                    out.push_str(&s.to_string());
                }
                out.push('\n');
            }
        }
        out
    }

    /// Joins parsed records with the dataset's labels by `(video, frame)`.
    pub fn from_records(records: Vec<PredictionRecord>, dataset: &Dataset) -> Result<Self> {
        let mut truth: HashMap<(&str, usize), &LabelVector> = HashMap::new();
        for v in &dataset.videos {
            for (f, l) in v.frames.iter().zip(&v.labels) {
                truth.insert((&*v.id, f.index), l);
            }
        }
        let mut by_video: BTreeMap<String, Vec<FramePrediction>> = BTreeMap::new();
        for r in records {
            let l = match truth.get(&(r.video.as_str(), r.frame)) {
                Some(&l) => l.clone(),
                None => {
                    return Err(Error::Data(format!(
                        "no label for video {} frame {}",
                        r.video, r.frame
                    )))
                }
            };
            by_video.entry(r.video).or_default().push(FramePrediction {
                frame: r.frame,
                scores: r.scores,
                truth: l,
            });
        }
        let mut log = PredictionLog::new();
        for (vid, frames) in by_video {
            log.insert_video(&vid, frames)?;
        }
        Ok(log)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub video: String,
    pub frame: usize,
    pub scores: Vec<f64>,
}

pub fn parse_prediction_file(text: &str, source_name: &str) -> Result<Vec<PredictionRecord>> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split('\n')
        .enumerate()
        .map(|(i, line)| {
            let err = |m: String| Error::parse(source_name, i + 1, m);
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != NUM_TRIPLETS + 2 {
                return Err(err(format!(
                    "expected {} fields, found {}",
                    NUM_TRIPLETS + 2,
                    fields.len()
                )));
            }
            if !crate::datapipe::split::is_valid_video_id(fields[0]) {
                return Err(err(format!("video id {:?} is not a plain name", fields[0])));
            }
            if fields[1].is_empty() || !fields[1].bytes().all(|b| b.is_ascii_digit()) {
                return Err(err(format!(
                    "frame index {:?} is not a non-negative integer",
                    fields[1]
                )));
            }
            let frame = fields[1]
                .parse()
                .map_err(|_| err(format!("frame index {:?} overflows", fields[1])))?;
            let scores = fields[2..]
                .iter()
                .map(|f| match f.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(err(format!("score {f:?} is not a finite number"))),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PredictionRecord {
                video: fields[0].to_string(),
                frame,
                scores,
            })
        })
        .collect()
}
