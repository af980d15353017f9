//! Named folds of video ids, stored as TOML `[[fold]]` tables.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{toml_error, Error, Result};

const CHOLECT45_CROSSVAL: &str = include_str!("../../data/cholect45_crossval.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fold {
    pub name: String,
    pub videos: Vec<String>,
}

/// Fold names are unique and folds are pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    #[serde(rename = "fold")]
    pub folds: Vec<Fold>,
}

impl SplitSpec {
    pub fn new(folds: Vec<Fold>) -> Result<Self> {
        let spec = SplitSpec { folds };
        spec.validate()?;
        Ok(spec)
    }

    /// The bundled five-fold CholecT45 cross-validation split.
    pub fn cholect45_crossval() -> Self {
        Self::parse(CHOLECT45_CROSSVAL, "cholect45_crossval.toml").expect("bundled split is valid")
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let spec: SplitSpec =
            toml::from_str(text).map_err(|e| toml_error(source_name, text, &e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("split serializes")
    }

    fn validate(&self) -> Result<()> {
        if self.folds.is_empty() {
            return Err(Error::Config("split defines no folds".into()));
        }
        let mut names = HashSet::new();
        let mut seen = HashSet::new();
        for f in &self.folds {
            if f.name.is_empty() || !names.insert(f.name.as_str()) {
                return Err(Error::Config(format!(
                    "fold name {:?} is empty or repeated",
                    f.name
                )));
            }
            for v in &f.videos {
                if !is_valid_video_id(v) {
                    return Err(Error::Config(format!(
                        "video id {v:?} in fold {:?} is not a plain name",
                        f.name
                    )));
                }
                if !seen.insert(v.as_str()) {
                    return Err(Error::Config(format!(
                        "video {v:?} appears in more than one fold"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn fold_names(&self) -> Vec<&str> {
        self.folds.iter().map(|f| f.name.as_str()).collect()
    }

    /// Videos of the named folds, in fold order; an empty selection means all folds.
    pub fn videos(&self, folds: &[String]) -> Result<Vec<String>> {
        if folds.is_empty() {
            return Ok(self.all_videos());
        }
        let mut out = Vec::new();
        for name in folds {
            let f = self.folds.iter().find(|f| &f.name == name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown fold {name:?}; known: {:?}",
                    self.fold_names()
                ))
            })?;
            out.extend(f.videos.iter().cloned());
        }
        Ok(out)
    }

    pub fn all_videos(&self) -> Vec<String> {
        self.folds
            .iter()
            .flat_map(|f| f.videos.iter().cloned())
            .collect()
    }
}

/// Video ids double as directory and file names.
pub fn is_valid_video_id(v: &str) -> bool {
    !v.is_empty()
        && v.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}
