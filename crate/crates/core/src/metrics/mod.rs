//! Average precision, projection of triplet scores onto components and
//! pairs, and the per-video evaluation report.

pub mod ap;
pub mod predlog;
pub mod projection;
pub mod report;

pub use ap::average_precision;
pub use predlog::{parse_prediction_file, FramePrediction, PredictionLog, PredictionRecord};
pub use projection::{pair_labels, project_components, ComponentScores};
pub use report::{video_ap, EvalReport, Head, HeadReport};
