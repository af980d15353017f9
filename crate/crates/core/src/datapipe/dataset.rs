//! On-disk layout:
//!
//! ```text
//! root/taxonomy.csv              optional, bundled vocabulary otherwise
//! root/labels/<video>.txt        label file per video
//! root/frames/<video>/<frame>.png  frame index zero-padded to 6 digits
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gradtape::Tensor;
use image::imageops::FilterType;
use image::{ImageBuffer, Rgb, RgbImage};
use rayon::prelude::*;

use super::clips::{clip_at, Frame, VideoClip};
use super::split::{is_valid_video_id, SplitSpec};
use crate::error::{Error, Result};
use crate::labels::{format_label_file, parse_label_file, LabelRecord, LabelVector};
use crate::taxonomy::TripletTaxonomy;

#[derive(Debug, Clone)]
pub struct Video {
    pub id: Arc<str>,
    pub frames: Vec<Frame>,
    pub labels: Vec<LabelVector>,
}

impl Video {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn clip(&self, t: usize, m: usize) -> VideoClip {
        clip_at(&self.frames, &self.labels, t, m)
    }
}

/// Immutable after construction. Every frame is `[3, h, w]` at `resolution`
/// and every video has one label per frame.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub taxonomy: Arc<TripletTaxonomy>,
    pub videos: Vec<Video>,
    pub resolution: (usize, usize),
}

impl Dataset {
    pub fn new(
        taxonomy: Arc<TripletTaxonomy>,
        videos: Vec<Video>,
        resolution: (usize, usize),
    ) -> Result<Self> {
        for v in &videos {
            if v.frames.len() != v.labels.len() {
                return Err(Error::Data(format!(
                    "video {}: {} frames but {} labels",
                    v.id,
                    v.frames.len(),
                    v.labels.len()
                )));
            }
            if v.frames.is_empty() {
                return Err(Error::Data(format!("video {} has no frames", v.id)));
            }
            for f in &v.frames {
                if f.image.shape() != [3, resolution.0, resolution.1] {
                    return Err(Error::Data(format!(
                        "video {} frame {} has shape {:?}, expected [3, {}, {}]",
                        v.id,
                        f.index,
                        f.image.shape(),
                        resolution.0,
                        resolution.1
                    )));
                }
            }
            if let Some(l) = v.labels.iter().find(|l| !l.is_consistent(&taxonomy)) {
                return Err(Error::Data(format!(
                    "video {}: inconsistent label {:?}",
                    v.id,
                    l.active_triplets()
                )));
            }
        }
        Ok(Dataset {
            taxonomy,
            videos,
            resolution,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.videos.iter().map(Video::len).sum()
    }

    pub fn video(&self, id: &str) -> Option<&Video> {
        self.videos.iter().find(|v| &*v.id == id)
    }

    pub fn labels(&self) -> impl Iterator<Item = &LabelVector> {
        self.videos.iter().flat_map(|v| v.labels.iter())
    }
}

fn frame_path(root: &Path, video: &str, index: usize) -> PathBuf {
    root.join("frames")
        .join(video)
        .join(format!("{index:06}.png"))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_image(path: &Path, (h, w): (usize, usize)) -> Result<Tensor<f32>> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other}", path.display())),
    })?;
    let mut rgb = img.to_rgb8();
    if (rgb.height() as usize, rgb.width() as usize) != (h, w) {
        rgb = image::imageops::resize(&rgb, w as u32, h as u32, FilterType::Triangle);
    }
    Ok(Tensor::new(rgb_to_chw(&rgb), &[3, h, w])?)
}

pub(crate) fn rgb_to_chw(img: &RgbImage) -> Vec<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut out = vec![0f32; 3 * h * w];
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            out[c * h * w + y as usize * w + x as usize] = f32::from(px[c]) / 255.0;
        }
    }
    out
}

fn chw_to_rgb(t: &Tensor<f32>) -> RgbImage {
    let (h, w) = (t.shape()[1], t.shape()[2]);
    let d = t.data();
    ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let at = |c: usize| {
            (d[c * h * w + y as usize * w + x as usize].clamp(0.0, 1.0) * 255.0).round() as u8
        };
        Rgb([at(0), at(1), at(2)])
    })
}

/// Loads the videos of `folds` (all folds when empty), resizing frames to `resolution`.
pub fn load_dataset(
    root: &Path,
    split: &SplitSpec,
    folds: &[String],
    resolution: (usize, usize),
) -> Result<Dataset> {
    if resolution.0 == 0 || resolution.1 == 0 {
        return Err(Error::Config(format!(
            "resolution {resolution:?} must be positive"
        )));
    }
    let tax_path = root.join("taxonomy.csv");
    let taxonomy = if tax_path.exists() {
        TripletTaxonomy::parse(&read_text(&tax_path)?, &tax_path.display().to_string())?
    } else {
        TripletTaxonomy::default()
    };
    let taxonomy = Arc::new(taxonomy);
    let ids = split.videos(folds)?;
    let videos = ids
        .par_iter()
        .map(|id| {
            let label_path = root.join("labels").join(format!("{id}.txt"));
            let records = parse_label_file(
                &read_text(&label_path)?,
                &label_path.display().to_string(),
                &taxonomy,
            )?;
            let vid: Arc<str> = Arc::from(id.as_str());
            let frames = records
                .iter()
                .map(|r| {
                    Ok(Frame {
                        image: load_image(&frame_path(root, id, r.frame), resolution)?,
                        video_id: vid.clone(),
                        index: r.frame,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Video {
                id: vid,
                frames,
                labels: records.into_iter().map(|r| r.label).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(taxonomy, videos, resolution)
}

/// Writes `ds` in the layout read by [`load_dataset`], plus a `split.toml`
/// placing each video in its own fold.
pub fn write_dataset(ds: &Dataset, root: &Path) -> Result<SplitSpec> {
    let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    let write = |p: &Path, bytes: &[u8]| fs::write(p, bytes).map_err(|e| Error::io(p, e));
    mkdir(&root.join("labels"))?;
    write(&root.join("taxonomy.csv"), ds.taxonomy.to_text().as_bytes())?;
    let mut folds = Vec::new();
    for v in &ds.videos {
        if !is_valid_video_id(&v.id) {
            return Err(Error::Config(format!(
                "video id {:?} is not a plain name",
                v.id
            )));
        }
        let records: Vec<LabelRecord> = v
            .frames
            .iter()
            .zip(&v.labels)
            .map(|(f, l)| LabelRecord {
                frame: f.index,
                label: l.clone(),
            })
            .collect();
        write(
            &root.join("labels").join(format!("{}.txt", v.id)),
            format_label_file(&records).as_bytes(),
        )?;
        mkdir(&root.join("frames").join(&*v.id))?;
        for f in &v.frames {
            let p = frame_path(root, &v.id, f.index);
            chw_to_rgb(&f.image).save(&p).map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(&p, io),
                other => Error::Data(format!("{}: {other}", p.display())),
            })?;
        }
        folds.push(super::split::Fold {
            name: v.id.to_string(),
            videos: vec![v.id.to_string()],
        });
    }
    let split = SplitSpec::new(folds)?;
    write(&root.join("split.toml"), split.to_text().as_bytes())?;
    Ok(split)
}
