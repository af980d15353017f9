use serde::{Deserialize, Serialize};

use crate::error::{toml_error, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionPosition {
    /// Temporal fusion on backbone features projected to class channels,
    /// before instrument guidance.
    Early,
    /// Temporal fusion on instrument-guided verb features.
    Late,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TamTarget {
    Verb,
    Instrument,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TamConfig {
    pub position: FusionPosition,
    /// 1 or 2
    pub layers: usize,
    pub targets: Vec<TamTarget>,
    /// odd temporal kernel length
    pub kernel: usize,
}

impl Default for TamConfig {
    fn default() -> Self {
        TamConfig {
            position: FusionPosition::Late,
            layers: 2,
            targets: vec![TamTarget::Verb],
            kernel: 3,
        }
    }
}

impl TamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.layers) {
            return Err(Error::Config(format!(
                "tam layers must be 1 or 2, got {}",
                self.layers
            )));
        }
        if self.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "tam kernel must be odd, got {}",
                self.kernel
            )));
        }
        let mut t = self.targets.clone();
        t.sort();
        t.dedup();
        if t.len() != self.targets.len() {
            return Err(Error::Config(format!(
                "tam targets repeat: {:?}",
                self.targets
            )));
        }
        Ok(())
    }

    pub fn has(&self, t: TamTarget) -> bool {
        self.targets.contains(&t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// frames per clip
    pub clip_size: usize,
    /// input `[height, width]`
    pub resolution: [usize; 2],
    /// output channels of the four stride-2 backbone stages
    pub backbone_channels: [usize; 4],
    pub wsl_channels: usize,
    pub scene_channels: usize,
    /// query/key width of the guided attention
    pub attention_dim: usize,
    pub decoder_dim: usize,
    pub decoder_heads: usize,
    pub decoder_layers: usize,
    pub tam: TamConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            clip_size: 6,
            resolution: [64, 112],
            backbone_channels: [16, 32, 64, 128],
            wsl_channels: 32,
            scene_channels: 64,
            attention_dim: 16,
            decoder_dim: 64,
            decoder_heads: 4,
            decoder_layers: 2,
            tam: TamConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: usize, what: &str| {
            if v == 0 {
                Err(Error::Config(format!("{what} must be positive")))
            } else {
                Ok(())
            }
        };
        pos(self.clip_size, "clip_size")?;
        pos(self.resolution[0], "resolution height")?;
        pos(self.resolution[1], "resolution width")?;
        for c in self.backbone_channels {
            pos(c, "backbone channel width")?;
        }
        pos(self.wsl_channels, "wsl_channels")?;
        pos(self.scene_channels, "scene_channels")?;
        pos(self.attention_dim, "attention_dim")?;
        pos(self.decoder_dim, "decoder_dim")?;
        pos(self.decoder_heads, "decoder_heads")?;
        if !self.decoder_dim.is_multiple_of(self.decoder_heads) {
            return Err(Error::Config(format!(
                "decoder_dim {} is not divisible by {} heads",
                self.decoder_dim, self.decoder_heads
            )));
        }
        self.tam.validate()
    }

    /// Spatial extents after the four stride-2 stages.
    pub fn feature_extent(&self) -> (usize, usize) {
        let shrink = |mut v: usize| {
            for _ in 0..4 {
                v = v.div_ceil(2);
            }
            v
        };
        (shrink(self.resolution[0]), shrink(self.resolution[1]))
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let c: ModelConfig = toml::from_str(text).map_err(|e| toml_error(source_name, text, &e))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("model config serializes")
    }
}
