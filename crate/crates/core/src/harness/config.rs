use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datapipe::{load_dataset, synth_generate, Dataset, SplitSpec, SynthSpec};
use crate::error::{toml_error, Error, Result};
use crate::model::{FusionPosition, ModelConfig, TamTarget};

/// Where training and evaluation data come from: a dataset directory with a
/// split file, or the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub root: Option<PathBuf>,
    /// `[[fold]]` file; the bundled five-fold split when absent
    pub split: Option<PathBuf>,
    pub train_folds: Vec<String>,
    pub eval_folds: Vec<String>,
    pub synthetic: Option<SynthSpec>,
    pub synthetic_train_seed: u64,
    /// held-out synthetic videos; the training videos when absent
    pub synthetic_eval_seed: Option<u64>,
}

/// Changes applied on top of a base run for one ablation variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct AblationDelta {
    pub name: Option<String>,
    pub clip_size: Option<usize>,
    pub position: Option<FusionPosition>,
    pub layers: Option<usize>,
    pub targets: Option<Vec<TamTarget>>,
    pub kernel: Option<usize>,
    pub epochs: Option<usize>,
}

impl AblationDelta {
    pub fn apply(&self, base: &RunConfig) -> Result<RunConfig> {
        let mut c = base.clone();
        if let Some(m) = self.clip_size {
            c.model.clip_size = m;
        }
        if let Some(p) = self.position {
            c.model.tam.position = p;
        }
        if let Some(l) = self.layers {
            c.model.tam.layers = l;
        }
        if let Some(t) = &self.targets {
            c.model.tam.targets = t.clone();
        }
        if let Some(k) = self.kernel {
            c.model.tam.kernel = k;
        }
        if let Some(e) = self.epochs {
            c.epochs = e;
        }
        c.ablation.clear();
        c.validate()?;
        Ok(c)
    }

    /// `name` when given, else the changed fields joined with spaces.
    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let mut parts = Vec::new();
        if let Some(m) = self.clip_size {
            parts.push(format!("m={m}"));
        }
        if let Some(p) = self.position {
            parts.push(format!(
                "position={}",
                if p == FusionPosition::Early {
                    "early"
                } else {
                    "late"
                }
            ));
        }
        if let Some(l) = self.layers {
            parts.push(format!("layers={l}"));
        }
        if let Some(t) = &self.targets {
            let names: Vec<&str> = t
                .iter()
                .map(|x| match x {
                    TamTarget::Verb => "verb",
                    TamTarget::Instrument => "instrument",
                    TamTarget::Target => "target",
                })
                .collect();
            parts.push(format!("targets={}", names.join("+")));
        }
        if let Some(k) = self.kernel {
            parts.push(format!("kernel={k}"));
        }
        if let Some(e) = self.epochs {
            parts.push(format!("epochs={e}"));
        }
        if parts.is_empty() {
            "base".into()
        } else {
            parts.join(" ")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch: usize,
    pub base_lr: f64,
    pub weight_decay: f64,
    pub warmup_fraction: f64,
    pub decay_gamma: f64,
    pub augment: bool,
    /// checkpoint every k epochs; 0 writes only the final one
    pub checkpoint_every: usize,
    /// batches are assembled inline rather than by a prefetch worker
    pub deterministic: bool,
    pub model: ModelConfig,
    pub data: DataConfig,
    pub ablation: Vec<AblationDelta>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            epochs: 50,
            batch: 16,
            base_lr: 0.01,
            weight_decay: 1e-6,
            warmup_fraction: 0.1,
            decay_gamma: 0.95,
            augment: true,
            checkpoint_every: 0,
            deterministic: false,
            model: ModelConfig::default(),
            data: DataConfig::default(),
            ablation: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| toml_error(source_name, text, &e))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::parse(&text, &path.display().to_string())?;
        // relative data paths are resolved against the config file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut c.data.root, &mut c.data.split].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.batch == 0 {
            return cfg("batch must be at least 1".into());
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return cfg(format!(
                "warmup_fraction {} must lie in (0, 1)",
                self.warmup_fraction
            ));
        }
        if !(self.decay_gamma > 0.0 && self.decay_gamma < 1.0) {
            return cfg(format!(
                "decay_gamma {} must lie in (0, 1)",
                self.decay_gamma
            ));
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return cfg(format!("base_lr {} must be positive", self.base_lr));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return cfg(format!(
                "weight_decay {} must be non-negative",
                self.weight_decay
            ));
        }
        if self.data.synthetic.is_some() && self.data.root.is_some() {
            return cfg("data.root and data.synthetic are mutually exclusive".into());
        }
        if let Some(s) = &self.data.synthetic {
            s.validate()?;
            if [s.height, s.width] != self.model.resolution {
                return cfg(format!(
                    "synthetic canvas {}x{} differs from model resolution {:?}",
                    s.height, s.width, self.model.resolution
                ));
            }
        }
        self.model.validate()
    }

    fn split(&self) -> Result<SplitSpec> {
        match &self.data.split {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                SplitSpec::parse(&text, &p.display().to_string())
            }
            None => Ok(SplitSpec::cholect45_crossval()),
        }
    }

    fn resolution(&self) -> (usize, usize) {
        (self.model.resolution[0], self.model.resolution[1])
    }

    pub fn train_data(&self) -> Result<Dataset> {
        match (&self.data.synthetic, &self.data.root) {
            (Some(spec), _) => synth_generate(spec, self.data.synthetic_train_seed),
            (None, Some(root)) => load_dataset(
                root,
                &self.split()?,
                &self.data.train_folds,
                self.resolution(),
            ),
            (None, None) => Err(Error::Config(
                "no data source: set data.root or data.synthetic".into(),
            )),
        }
    }

    pub fn eval_data(&self) -> Result<Dataset> {
        match (&self.data.synthetic, &self.data.root) {
            (Some(spec), _) => synth_generate(
                spec,
                self.data
                    .synthetic_eval_seed
                    .unwrap_or(self.data.synthetic_train_seed),
            ),
            (None, Some(root)) => load_dataset(
                root,
                &self.split()?,
                &self.data.eval_folds,
                self.resolution(),
            ),
            (None, None) => Err(Error::Config(
                "no data source: set data.root or data.synthetic".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_training_recipe() {
        let c = RunConfig::default();
        assert_eq!(
            (c.batch, c.epochs, c.weight_decay, c.model.clip_size),
            (16, 50, 1e-6, 6)
        );
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.ablation.push(AblationDelta {
            clip_size: Some(4),
            ..Default::default()
        });
        c.data.synthetic = Some(SynthSpec {
            height: 64,
            width: 112,
            ..SynthSpec::default()
        });
        assert_eq!(RunConfig::parse(&c.to_text(), "c").unwrap(), c);
    }

    #[test]
    fn unknown_key_is_parse_error() {
        assert!(matches!(
            RunConfig::parse("sed = 3\n", "c"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn bad_fractions_are_config_errors() {
        assert!(matches!(
            RunConfig::parse("warmup_fraction = 1.5\n", "c"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::parse("decay_gamma = 0.0\n", "c"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn delta_labels() {
        let d = AblationDelta {
            clip_size: Some(4),
            position: Some(FusionPosition::Early),
            ..Default::default()
        };
        assert_eq!(d.label(), "m=4 position=early");
        assert_eq!(AblationDelta::default().label(), "base");
    }
}
