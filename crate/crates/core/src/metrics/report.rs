use rayon::prelude::*;

use super::ap::average_precision;
use super::predlog::{FramePrediction, PredictionLog};
use super::projection::{pair_labels, project_components};
use crate::error::{Error, Result};
use crate::table::{fmt_ap, Table};
use crate::taxonomy::{
    TripletTaxonomy, NUM_INSTRUMENTS, NUM_IT, NUM_IV, NUM_TARGETS, NUM_TRIPLETS, NUM_VERBS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Head {
    I,
    V,
    T,
    IV,
    IT,
    IVT,
}

impl Head {
    pub const ALL: [Head; 6] = [Head::I, Head::V, Head::T, Head::IV, Head::IT, Head::IVT];

    pub fn column(self) -> &'static str {
        match self {
            Head::I => "AP_I",
            Head::V => "AP_V",
            Head::T => "AP_T",
            Head::IV => "AP_IV",
            Head::IT => "AP_IT",
            Head::IVT => "AP_IVT",
        }
    }

    pub fn classes(self) -> usize {
        match self {
            Head::I => NUM_INSTRUMENTS,
            Head::V => NUM_VERBS,
            Head::T => NUM_TARGETS,
            Head::IV => NUM_IV,
            Head::IT => NUM_IT,
            Head::IVT => NUM_TRIPLETS,
        }
    }

    pub fn class_name(self, c: usize, tax: &TripletTaxonomy) -> String {
        let (iv, it) = (c / NUM_VERBS, c / NUM_TARGETS);
        match self {
            Head::I => tax.instrument_names()[c].clone(),
            Head::V => tax.verb_names()[c].clone(),
            Head::T => tax.target_names()[c].clone(),
            Head::IV => format!(
                "{}:{}",
                tax.instrument_names()[iv],
                tax.verb_names()[c % NUM_VERBS]
            ),
            Head::IT => format!(
                "{}:{}",
                tax.instrument_names()[it],
                tax.target_names()[c % NUM_TARGETS]
            ),
            Head::IVT => tax.triplet_name(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadReport {
    /// mean over videos of each video's class-mean AP
    pub mean: Option<f64>,
    /// per class, mean over the videos where the class has a positive
    pub per_class: Vec<Option<f64>>,
    /// per video (sorted by id), mean over the defined classes
    pub per_video: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub videos: Vec<String>,
    pub heads: Vec<(Head, HeadReport)>,
}

fn mean(vals: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = vals
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-frame `(scores, labels)` rows of one head.
fn head_rows(
    seq: &[FramePrediction],
    tax: &TripletTaxonomy,
    head: Head,
) -> (Vec<Vec<f64>>, Vec<Vec<u8>>) {
    seq.iter()
        .map(|p| {
            let proj = project_components(&p.scores, tax);
            let (iv, it) = pair_labels(&p.truth, tax);
            match head {
                Head::I => (proj.instrument, p.truth.instrument.clone()),
                Head::V => (proj.verb, p.truth.verb.clone()),
                Head::T => (proj.target, p.truth.target.clone()),
                Head::IV => (proj.iv, iv),
                Head::IT => (proj.it, it),
                Head::IVT => (p.scores.clone(), p.truth.triplet.clone()),
            }
        })
        .unzip()
}

fn per_class_ap(
    seq: &[FramePrediction],
    tax: &TripletTaxonomy,
    head: Head,
) -> Result<Vec<Option<f64>>> {
    let (scores, labels) = head_rows(seq, tax, head);
    (0..head.classes())
        .map(|c| {
            let s: Vec<f64> = scores.iter().map(|r| r[c]).collect();
            let l: Vec<u8> = labels.iter().map(|r| r[c]).collect();
            average_precision(&s, &l)
        })
        .collect()
}

/// Per video: AP per class, mean over classes with a positive. Then mean over videos.
pub fn video_ap(log: &PredictionLog, tax: &TripletTaxonomy) -> Result<EvalReport> {
    if log.num_videos() == 0 {
        return Err(Error::Data("prediction log is empty".into()));
    }
    let videos: Vec<(&str, &[FramePrediction])> = log.videos().collect();
    if let Some((v, _)) = videos.iter().find(|(_, s)| s.is_empty()) {
        return Err(Error::Data(format!("video {v} has no predictions")));
    }
    // [video][head] -> per-class AP
    let tables: Vec<Vec<Vec<Option<f64>>>> = videos
        .par_iter()
        .map(|(_, seq)| {
            Head::ALL
                .iter()
                .map(|&h| per_class_ap(seq, tax, h))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let heads = Head::ALL
        .iter()
        .enumerate()
        .map(|(hi, &h)| {
            let per_video: Vec<Option<f64>> =
                tables.iter().map(|t| mean(t[hi].iter().copied())).collect();
            let per_class = (0..h.classes())
                .map(|c| mean(tables.iter().map(|t| t[hi][c])))
                .collect();
            (
                h,
                HeadReport {
                    mean: mean(per_video.iter().copied()),
                    per_class,
                    per_video,
                },
            )
        })
        .collect();
    Ok(EvalReport {
        videos: videos.iter().map(|(v, _)| v.to_string()).collect(),
        heads,
    })
}

impl EvalReport {
    pub fn head(&self, h: Head) -> &HeadReport {
        &self
            .heads
            .iter()
            .find(|(x, _)| *x == h)
            .expect("all heads present")
            .1
    }

    pub fn aggregate(&self, h: Head) -> Option<f64> {
        self.head(h).mean
    }

    pub fn aggregates(&self) -> [Option<f64>; 6] {
        Head::ALL.map(|h| self.aggregate(h))
    }

    /// One row of the six aggregate columns.
    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(Head::ALL.map(Head::column));
        t.push(self.aggregates().iter().map(|&v| fmt_ap(v)).collect());
        t
    }

    pub fn per_video_table(&self) -> Table {
        let mut t = Table::new(std::iter::once("video").chain(Head::ALL.map(Head::column)));
        for (vi, v) in self.videos.iter().enumerate() {
            let mut row = vec![v.clone()];
            row.extend(Head::ALL.map(|h| fmt_ap(self.head(h).per_video[vi])));
            t.push(row);
        }
        t
    }

    /// Classes undefined in every video are omitted.
    pub fn per_class_table(&self, tax: &TripletTaxonomy) -> Table {
        let mut t = Table::new(["head", "class", "name", "ap"]);
        for (h, r) in &self.heads {
            for (c, ap) in r.per_class.iter().enumerate() {
                if ap.is_some() {
                    t.push(vec![
                        h.column().to_string(),
                        c.to_string(),
                        h.class_name(c, tax),
                        fmt_ap(*ap),
                    ]);
                }
            }
        }
        t
    }
}
