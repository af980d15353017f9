//! The assembled recognizer: backbone, instrument localization, guided
//! temporal attention and the triplet decoder.

pub mod backbone;
pub mod cagtam;
pub mod config;
pub mod decoder;

use gradtape::checkpoint::Checkpoint;
use gradtape::{Ctx, ParamStore, Real, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use backbone::{
    Backbone, FrameFeatures, InstrumentCam, SceneBottleneck, SceneFeatures, WslHead,
};
pub use cagtam::{tam_fuse, tam_scale, Cagtam, CagtamOutput, Fused, GuidedBranch, Tam, TamBlock};
pub use config::{FusionPosition, ModelConfig, TamConfig, TamTarget};
pub use decoder::{DecoderOutput, TripletDecoder};

use crate::error::{toml_error, Error, Result};

#[derive(Debug, Clone)]
pub struct ModelOutput<T: Real> {
    pub decoder: DecoderOutput<T>,
    pub cam: InstrumentCam<T>,
    pub cagtam: CagtamOutput<T>,
}

#[derive(Debug, Clone)]
pub struct TripletModel<T: Real> {
    pub config: ModelConfig,
    pub store: ParamStore<T>,
    pub backbone: Backbone,
    pub wsl: WslHead,
    pub scene: SceneBottleneck,
    pub cagtam: Cagtam,
    pub decoder: TripletDecoder,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    taxonomy_digest: String,
    model: ModelConfig,
}

impl<T: Real> TripletModel<T> {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let backbone = Backbone::new(&mut store, config, &mut rng)?;
        let wsl = WslHead::new(&mut store, config, &mut rng)?;
        let scene = SceneBottleneck::new(&mut store, config, &mut rng)?;
        let cagtam = Cagtam::new(&mut store, config, &mut rng)?;
        let decoder = TripletDecoder::new(&mut store, config, &mut rng)?;
        Ok(TripletModel {
            config: config.clone(),
            store,
            backbone,
            wsl,
            scene,
            cagtam,
            decoder,
        })
    }

    /// `clip` is `[b, 3, m, h, w]`.
    pub fn forward(&self, clip: &Tensor<T>, ctx: &mut Ctx<T>) -> Result<ModelOutput<T>> {
        let s = &self.store;
        let features = self.backbone.extract_features(s, clip, ctx)?;
        let cam = self.wsl.forward(s, &features)?;
        let scene = self.scene.forward(s, &features)?;
        let cagtam = self.cagtam.forward(s, &features, &cam, ctx)?;
        let decoder = self.decoder.decode(
            s,
            &scene.scene,
            &cagtam.instrument.map,
            &cagtam.verb.map,
            &cagtam.target.map,
        )?;
        Ok(ModelOutput {
            decoder,
            cam,
            cagtam,
        })
    }

    /// Same architecture and values at another precision.
    pub fn cast<U: Real>(&self) -> TripletModel<U> {
        TripletModel {
            config: self.config.clone(),
            store: self.store.cast(),
            backbone: self.backbone.clone(),
            wsl: self.wsl.clone(),
            scene: self.scene.clone(),
            cagtam: self.cagtam.clone(),
            decoder: self.decoder.clone(),
        }
    }

    pub fn to_checkpoint(&self, taxonomy_digest: &str) -> Checkpoint {
        let manifest = Manifest {
            taxonomy_digest: taxonomy_digest.to_string(),
            model: self.config.clone(),
        };
        self.store
            .to_checkpoint(&toml::to_string(&manifest).expect("manifest serializes"))
    }

    /// Rebuilds the model described by the manifest and loads its values.
    /// Returns the taxonomy digest recorded at save time.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(Self, String)> {
        let manifest: Manifest = toml::from_str(&ckpt.manifest)
            .map_err(|e| toml_error("checkpoint manifest", &ckpt.manifest, &e))?;
        let mut model = TripletModel::new(&manifest.model, 0)?;
        model.store.load_checkpoint(ckpt)?;
        Ok((model, manifest.taxonomy_digest))
    }
}

pub fn check_vocabulary(recorded: &str, actual: &str) -> Result<()> {
    if recorded != actual {
        return Err(Error::Config(format!(
            "checkpoint vocabulary {recorded} does not match dataset vocabulary {actual}"
        )));
    }
    Ok(())
}
