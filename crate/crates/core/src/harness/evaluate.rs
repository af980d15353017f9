use std::path::Path;

use gradtape::Ctx;
use rayon::prelude::*;

use crate::datapipe::{stack_clips, Dataset, Video};
use crate::error::{Error, Result};
use crate::metrics::{project_components, video_ap, EvalReport, FramePrediction, PredictionLog};
use crate::model::{check_vocabulary, TripletModel};
use crate::table::Table;
use crate::taxonomy::TripletTaxonomy;

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub log: PredictionLog,
}

/// Sigmoid triplet scores for every frame of `video`, in frame order. Each
/// clip sees only frames at or before its last frame.
pub fn predict_video(
    model: &TripletModel<f32>,
    video: &Video,
    batch: usize,
) -> Result<Vec<Vec<f64>>> {
    let m = model.config.clip_size;
    let mut out = Vec::with_capacity(video.len());
    let positions: Vec<usize> = (0..video.len()).collect();
    for chunk in positions.chunks(batch.max(1)) {
        let clips: Vec<_> = chunk.iter().map(|&t| video.clip(t, m)).collect();
        let x = stack_clips(&clips)?;
        let y = model.forward(&x, &mut Ctx::eval())?.decoder.y_ivt.sigmoid();
        let c = y.shape()[1];
        out.extend(
            y.data()
                .chunks(c)
                .map(|r| r.iter().map(|&v| f64::from(v)).collect()),
        );
    }
    Ok(out)
}

/// Scores every frame of every video and computes the report. With
/// `out_dir`, writes the prediction log, report tables and a timeline.
pub fn evaluate(
    model: &TripletModel<f32>,
    taxonomy_digest: &str,
    data: &Dataset,
    batch: usize,
    out_dir: Option<&Path>,
) -> Result<EvalOutcome> {
    check_vocabulary(taxonomy_digest, &data.taxonomy.digest())?;
    let mut frozen = model.clone();
    frozen.store.set_requires_grad(false);
    let scored: Vec<Vec<Vec<f64>>> = data
        .videos
        .par_iter()
        .map(|v| predict_video(&frozen, v, batch))
        .collect::<Result<_>>()?;
    let mut log = PredictionLog::new();
    for (v, scores) in data.videos.iter().zip(scored) {
        let frames = v
            .frames
            .iter()
            .zip(&v.labels)
            .zip(scores)
            .map(|((f, l), s)| FramePrediction {
                frame: f.index,
                scores: s,
                truth: l.clone(),
            })
            .collect();
        log.insert_video(&v.id, frames)?;
    }
    let report = video_ap(&log, &data.taxonomy)?;
    if let Some(dir) = out_dir {
        write_outputs(dir, &report, &log, &data.taxonomy)?;
    }
    Ok(EvalOutcome { report, log })
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}

/// Per frame: true and top-scored triplet and verb.
pub fn timeline_table(log: &PredictionLog, tax: &TripletTaxonomy) -> Table {
    let mut t = Table::new([
        "video",
        "frame",
        "true_triplets",
        "pred_triplet",
        "pred_score",
        "true_verbs",
        "pred_verb",
    ]);
    for (vid, seq) in log.videos() {
        for p in seq {
            let top = argmax(&p.scores);
            let verbs = project_components(&p.scores, tax).verb;
            let true_verbs: Vec<String> = (0..p.truth.verb.len())
                .filter(|&v| p.truth.verb[v] == 1)
                .map(|v| v.to_string())
                .collect();
            let true_trips: Vec<String> = p
                .truth
                .active_triplets()
                .iter()
                .map(usize::to_string)
                .collect();
            t.push(vec![
                vid.to_string(),
                p.frame.to_string(),
                true_trips.join(";"),
                top.to_string(),
                format!("{:.6}", p.scores[top]),
                true_verbs.join(";"),
                argmax(&verbs).to_string(),
            ]);
        }
    }
    t
}

pub fn write_outputs(
    dir: &Path,
    report: &EvalReport,
    log: &PredictionLog,
    tax: &TripletTaxonomy,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("predictions.txt", log.to_text())?;
    write("report.csv", report.summary_table().to_csv())?;
    write("per_video.csv", report.per_video_table().to_csv())?;
    write("per_class.csv", report.per_class_table(tax).to_csv())?;
    write("timeline.csv", timeline_table(log, tax).to_csv())?;
    write(
        "report.txt",
        format!(
            "{}\n{}\n{}",
            report.summary_table().to_text(),
            report.per_video_table().to_text(),
            report.per_class_table(tax).to_text()
        ),
    )
}
