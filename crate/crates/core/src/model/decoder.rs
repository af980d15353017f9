//! Attention over four pooled tokens (scene, instrument, verb, target) to
//! 100 triplet logits.

use gradtape::nn::Linear;
use gradtape::{multi_head_attention, ParamStore, Real, Tensor, TensorError};
use rand::Rng;

use super::config::ModelConfig;
use crate::error::Result;
use crate::taxonomy::{NUM_INSTRUMENTS, NUM_TARGETS, NUM_TRIPLETS, NUM_VERBS};

#[derive(Debug, Clone)]
pub struct DecoderOutput<T: Real> {
    /// `[b, 100]`
    pub y_ivt: Tensor<T>,
    /// `[b, 6]`, spatial mean of the instrument map
    pub y_i: Tensor<T>,
    /// `[b, 10]`, spatial mean of the verb map
    pub y_v: Tensor<T>,
    /// `[b, 15]`, spatial mean of the target map
    pub y_t: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct AttentionLayer {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
}

#[derive(Debug, Clone)]
pub struct TripletDecoder {
    pub scene: Linear,
    pub instrument: Linear,
    pub verb: Linear,
    pub target: Linear,
    pub layers: Vec<AttentionLayer>,
    pub head: Linear,
    pub heads: usize,
}

impl TripletDecoder {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        cfg: &ModelConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let e = cfg.decoder_dim;
        let mut layers = Vec::with_capacity(cfg.decoder_layers);
        for l in 0..cfg.decoder_layers {
            let mut lin = |n: &str| Linear::new(store, &format!("decoder.layer{l}.{n}"), e, e, rng);
            layers.push(AttentionLayer {
                q: lin("q")?,
                k: lin("k")?,
                v: lin("v")?,
                o: lin("o")?,
            });
        }
        Ok(TripletDecoder {
            scene: Linear::new(store, "decoder.embed_scene", cfg.scene_channels, e, rng)?,
            instrument: Linear::new(store, "decoder.embed_instrument", NUM_INSTRUMENTS, e, rng)?,
            verb: Linear::new(store, "decoder.embed_verb", NUM_VERBS, e, rng)?,
            target: Linear::new(store, "decoder.embed_target", NUM_TARGETS, e, rng)?,
            layers,
            head: Linear::new(store, "decoder.head", e, NUM_TRIPLETS, rng)?,
            heads: cfg.decoder_heads,
        })
    }

    /// All four maps are `[b, c, h, w]` with shared `b, h, w`.
    pub fn decode<T: Real>(
        &self,
        store: &ParamStore<T>,
        scene: &Tensor<T>,
        h_i: &Tensor<T>,
        h_v: &Tensor<T>,
        h_t: &Tensor<T>,
    ) -> Result<DecoderOutput<T>> {
        let s = scene.shape();
        for (name, t, c) in [
            ("h_i", h_i, NUM_INSTRUMENTS),
            ("h_v", h_v, NUM_VERBS),
            ("h_t", h_t, NUM_TARGETS),
        ] {
            let ts = t.shape();
            if s.len() != 4 || ts.len() != 4 || ts[0] != s[0] || ts[1] != c || ts[2..] != s[2..] {
                return Err(TensorError::dim(
                    "decode",
                    format!("scene {s:?} and {name} {ts:?} disagree"),
                )
                .into());
            }
        }
        let y_i = h_i.global_avg_pool()?;
        let y_v = h_v.global_avg_pool()?;
        let y_t = h_t.global_avg_pool()?;
        let tokens = [
            self.scene.forward(store, &scene.global_avg_pool()?)?,
            self.instrument.forward(store, &y_i)?,
            self.verb.forward(store, &y_v)?,
            self.target.forward(store, &y_t)?,
        ];
        let tokens: Vec<Tensor<T>> = tokens
            .iter()
            .map(|t| t.unsqueeze(1))
            .collect::<Result<_, _>>()?;
        let mut x = Tensor::concat(&tokens, 1)?;
        for l in &self.layers {
            let a = multi_head_attention(
                &l.q.forward(store, &x)?,
                &l.k.forward(store, &x)?,
                &l.v.forward(store, &x)?,
                self.heads,
            )?;
            x = x.add(&l.o.forward(store, &a)?)?;
        }
        let y_ivt = self.head.forward(store, &x.mean_axis(1)?)?;
        Ok(DecoderOutput {
            y_ivt,
            y_i,
            y_v,
            y_t,
        })
    }
}
