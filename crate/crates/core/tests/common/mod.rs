//! Oracles, tiny configurations and reusable suites shared by the
//! integration tests and the acceptance runner.
#![allow(dead_code)]

use std::sync::Arc;

use gradtape::grad_check::{grad_check_inputs, grad_check_params};
use gradtape::{multi_head_attention, Ctx, Mode, ParamStore, RunningMoments, Tensor, TensorError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triplet_core::datapipe::{make_clips, synth_generate, Frame, SynthSpec, Video};
use triplet_core::harness::{predict_video, RunConfig};
use triplet_core::metrics::{average_precision, video_ap, FramePrediction, Head, PredictionLog};
use triplet_core::model::{
    tam_fuse, Backbone, Cagtam, FrameFeatures, FusionPosition, InstrumentCam, ModelConfig,
    TamConfig, TamTarget, TripletDecoder, TripletModel, WslHead,
};
use triplet_core::objective::{weighted_bce, ClassWeights};
use triplet_core::{LabelVector, TripletTaxonomy};

pub const GRAD_TOL: f64 = 1e-5;
pub const GRAD_STEP: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), shape).unwrap()
}

/// Scalar with a distinct random weight on every coordinate of `y`.
pub fn project(y: &Tensor<f64>, seed: u64) -> gradtape::Result<Tensor<f64>> {
    let w = rand_tensor(&mut rng(seed ^ 0x5bd1), y.shape());
    Ok(y.mul(&w)?.sum())
}

pub fn lower(e: triplet_core::Error) -> TensorError {
    match e {
        triplet_core::Error::Tensor(t) => t,
        other => TensorError::Contract(other.to_string()),
    }
}

/// Two-by-two feature maps with single-digit widths.
pub fn tiny_config(m: usize, position: FusionPosition, layers: usize) -> ModelConfig {
    ModelConfig {
        clip_size: m,
        resolution: [24, 28],
        backbone_channels: [2, 3, 3, 4],
        wsl_channels: 3,
        scene_channels: 3,
        attention_dim: 2,
        decoder_dim: 4,
        decoder_heads: 2,
        decoder_layers: 1,
        tam: TamConfig {
            position,
            layers,
            targets: vec![TamTarget::Verb, TamTarget::Instrument, TamTarget::Target],
            kernel: 3,
        },
    }
}

/// Narrow model used by every learning run of the suite.
pub fn bench_model(m: usize) -> ModelConfig {
    ModelConfig {
        clip_size: m,
        resolution: [16, 24],
        backbone_channels: [8, 16, 16, 32],
        wsl_channels: 16,
        scene_channels: 16,
        attention_dim: 8,
        decoder_dim: 32,
        ..ModelConfig::default()
    }
}

pub fn bench_spec(videos: usize, frames: usize) -> SynthSpec {
    SynthSpec {
        height: 16,
        width: 24,
        blob: 4,
        videos,
        frames,
        ..SynthSpec::default()
    }
}

pub fn bench_run(m: usize, epochs: usize, seed: u64) -> RunConfig {
    RunConfig {
        seed,
        epochs,
        base_lr: 0.003,
        decay_gamma: 0.99,
        deterministic: true,
        model: bench_model(m),
        ..RunConfig::default()
    }
}

type Primitive = Box<dyn Fn(&[Tensor<f64>]) -> gradtape::Result<Tensor<f64>>>;

/// Max relative gradient error per tensor primitive over three random points.
pub fn primitive_grad_errors() -> Vec<(String, f64)> {
    let running = RunningMoments {
        mean: vec![0.2, -0.1, 0.4],
        var: vec![1.5, 0.7, 1.1],
    };
    let (r1, r2) = (running.clone(), running);
    let cases: Vec<(&str, Vec<Vec<usize>>, Primitive)> = vec![
        (
            "add",
            vec![vec![2, 3], vec![2, 3]],
            Box::new(|x| x[0].add(&x[1])),
        ),
        (
            "sub",
            vec![vec![2, 3], vec![2, 3]],
            Box::new(|x| x[0].sub(&x[1])),
        ),
        (
            "mul",
            vec![vec![2, 3], vec![2, 3]],
            Box::new(|x| x[0].mul(&x[1])),
        ),
        ("relu", vec![vec![3, 4]], Box::new(|x| Ok(x[0].relu()))),
        (
            "sigmoid",
            vec![vec![3, 4]],
            Box::new(|x| Ok(x[0].sigmoid())),
        ),
        ("exp", vec![vec![5]], Box::new(|x| Ok(x[0].exp()))),
        ("square", vec![vec![5]], Box::new(|x| Ok(x[0].square()))),
        ("scale", vec![vec![5]], Box::new(|x| Ok(x[0].scale(-2.5)))),
        (
            "sum_axis",
            vec![vec![2, 3, 2]],
            Box::new(|x| x[0].sum_axis(1)),
        ),
        (
            "mean_axis",
            vec![vec![2, 3, 2]],
            Box::new(|x| x[0].mean_axis(2)),
        ),
        (
            "global_avg_pool",
            vec![vec![2, 3, 2, 3]],
            Box::new(|x| x[0].global_avg_pool()),
        ),
        (
            "reshape",
            vec![vec![2, 6]],
            Box::new(|x| x[0].reshape(&[3, 4])),
        ),
        (
            "permute",
            vec![vec![2, 3, 4]],
            Box::new(|x| x[0].permute(&[1, 2, 0])),
        ),
        (
            "select",
            vec![vec![2, 3, 4]],
            Box::new(|x| x[0].select(1, 2)),
        ),
        (
            "narrow",
            vec![vec![3, 4]],
            Box::new(|x| x[0].narrow(1, 1, 2)),
        ),
        (
            "concat",
            vec![vec![2, 1, 3], vec![2, 2, 3]],
            Box::new(|x| Tensor::concat(&[x[0].clone(), x[1].clone()], 1)),
        ),
        (
            "broadcast_to",
            vec![vec![2, 1, 3]],
            Box::new(|x| x[0].broadcast_to(&[2, 4, 3])),
        ),
        (
            "matmul",
            vec![vec![3, 4], vec![4, 2]],
            Box::new(|x| x[0].matmul(&x[1])),
        ),
        (
            "batched matmul",
            vec![vec![2, 3, 4], vec![2, 4, 2]],
            Box::new(|x| x[0].matmul(&x[1])),
        ),
        (
            "softmax",
            vec![vec![3, 5]],
            Box::new(|x| Ok(x[0].softmax_last())),
        ),
        (
            "attention",
            vec![vec![2, 3, 4], vec![2, 5, 4], vec![2, 5, 4]],
            Box::new(|x| multi_head_attention(&x[0], &x[1], &x[2], 2)),
        ),
        (
            "conv1d",
            vec![vec![2, 3, 5], vec![4, 3, 3], vec![4]],
            Box::new(|x| x[0].conv1d(&x[1], Some(&x[2]), 1)),
        ),
        (
            "conv2d",
            vec![vec![2, 2, 5, 6], vec![3, 2, 3, 3], vec![3]],
            Box::new(|x| x[0].conv2d(&x[1], Some(&x[2]), 2, 1)),
        ),
        (
            "batch_norm train",
            vec![vec![4, 3, 2], vec![3], vec![3]],
            Box::new(move |x| {
                Ok(x[0]
                    .batch_norm(&x[1], &x[2], &r1, Mode::Train, 1, 0.1, 1e-5)?
                    .output)
            }),
        ),
        (
            "batch_norm eval",
            vec![vec![4, 3, 2], vec![3], vec![3]],
            Box::new(move |x| {
                Ok(x[0]
                    .batch_norm(&x[1], &x[2], &r2, Mode::Eval, 1, 0.1, 1e-5)?
                    .output)
            }),
        ),
    ];
    let mut out = Vec::new();
    for (name, shapes, f) in &cases {
        let mut worst: f64 = 0.0;
        for seed in 0..3u64 {
            let mut r = rng(seed + 40);
            let pts: Vec<Tensor<f64>> = shapes.iter().map(|s| rand_tensor(&mut r, s)).collect();
            let rep = grad_check_inputs(|xs| project(&f(xs)?, seed), &pts, GRAD_STEP).unwrap();
            worst = worst.max(rep.max_rel_error);
        }
        out.push((name.to_string(), worst));
    }
    out
}

/// Max relative gradient error per composed path, each at several points.
pub fn composed_grad_errors() -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let (b, m) = (2, 3);
    for seed in 0..2u64 {
        let cfg = tiny_config(m, FusionPosition::Late, 2);
        let (fh, fw) = cfg.feature_extent();
        let d = cfg.backbone_channels[3];

        let mut store = ParamStore::<f64>::new();
        let mut r = rng(seed);
        let backbone = Backbone::new(&mut store, &cfg, &mut r).unwrap();
        let wsl = WslHead::new(&mut store, &cfg, &mut r).unwrap();
        let clip = rand_tensor(&mut r, &[b, 3, m, cfg.resolution[0], cfg.resolution[1]]);
        let rep = grad_check_params(
            &mut store,
            |s| {
                let mut ctx = Ctx::train();
                let f = backbone
                    .extract_features(s, &clip, &mut ctx)
                    .map_err(lower)?;
                let cam = wsl.forward(s, &f).map_err(lower)?;
                project(&cam.cam, seed)?.add(&project(&cam.logits, seed + 1)?)
            },
            GRAD_STEP,
        )
        .unwrap();
        out.push((format!("backbone->wsl seed {seed}"), rep.max_rel_error));

        for (position, layers) in [
            (FusionPosition::Late, 1),
            (FusionPosition::Late, 2),
            (FusionPosition::Early, 2),
        ] {
            let cfg = tiny_config(m, position, layers);
            let mut store = ParamStore::<f64>::new();
            let mut r = rng(seed + 10);
            let cagtam = Cagtam::new(&mut store, &cfg, &mut r).unwrap();
            let features = FrameFeatures {
                features: rand_tensor(&mut r, &[b, m, d, fh, fw]),
            };
            let maps = rand_tensor(&mut r, &[b, m, 6, fh, fw]);
            let cam = InstrumentCam {
                logits: maps.select(1, m - 1).unwrap().global_avg_pool().unwrap(),
                cam: maps,
            };
            let rep = grad_check_params(
                &mut store,
                |s| {
                    let o = cagtam
                        .forward(s, &features, &cam, &mut Ctx::train())
                        .map_err(lower)?;
                    project(&o.verb.map, seed)?
                        .add(&project(&o.target.map, seed + 1)?)?
                        .add(&project(&o.instrument.logits, seed + 2)?)
                },
                GRAD_STEP,
            )
            .unwrap();
            out.push((
                format!("cagtam {position:?} layers {layers} seed {seed}"),
                rep.max_rel_error,
            ));
        }

        let mut store = ParamStore::<f64>::new();
        let mut r = rng(seed + 20);
        let decoder = TripletDecoder::new(&mut store, &cfg, &mut r).unwrap();
        let maps: Vec<Tensor<f64>> = [cfg.scene_channels, 6, 10, 15]
            .iter()
            .map(|&c| rand_tensor(&mut r, &[b, c, fh, fw]))
            .collect();
        let rep = grad_check_params(
            &mut store,
            |s| {
                let o = decoder
                    .decode(s, &maps[0], &maps[1], &maps[2], &maps[3])
                    .map_err(lower)?;
                project(&o.y_ivt, seed)
            },
            GRAD_STEP,
        )
        .unwrap();
        out.push((format!("decoder params seed {seed}"), rep.max_rel_error));
        let rep = grad_check_inputs(
            |x| {
                project(
                    &decoder
                        .decode(&store, &x[0], &x[1], &x[2], &x[3])
                        .map_err(lower)?
                        .y_ivt,
                    seed,
                )
            },
            &maps,
            GRAD_STEP,
        )
        .unwrap();
        out.push((format!("decoder inputs seed {seed}"), rep.max_rel_error));

        let mut r = rng(seed + 30);
        let labels: Vec<f64> = (0..12)
            .map(|_| f64::from(r.random_bool(0.4) as u8))
            .collect();
        let labels = Tensor::new(labels, &[3, 4]).unwrap();
        let w = ClassWeights::new((0..4).map(|_| r.random_range(0.5..3.0)).collect()).unwrap();
        let logits = rand_tensor(&mut r, &[3, 4]).scale(3.0);
        let rep = grad_check_inputs(
            |x| weighted_bce(&x[0], &labels, &w).map_err(lower),
            &[logits],
            GRAD_STEP,
        )
        .unwrap();
        out.push((format!("weighted_bce seed {seed}"), rep.max_rel_error));
    }
    out
}

/// Nested-loop `sum_i w[b, i, c] * f[b, i, c, y, x]`.
pub fn tam_fuse_oracle(f: &Tensor<f64>, w: &Tensor<f64>) -> Vec<f64> {
    let s = f.shape();
    let (nb, nm, nc, nh, nw) = (s[0], s[1], s[2], s[3], s[4]);
    let (fd, wd) = (f.data(), w.data());
    let mut out = vec![0.0; nb * nc * nh * nw];
    for b in 0..nb {
        for c in 0..nc {
            for y in 0..nh {
                for x in 0..nw {
                    let mut acc = 0.0;
                    for i in 0..nm {
                        acc += wd[(b * nm + i) * nc + c]
                            * fd[(((b * nm + i) * nc + c) * nh + y) * nw + x];
                    }
                    out[((b * nc + c) * nh + y) * nw + x] = acc;
                }
            }
        }
    }
    out
}

/// Largest deviation of `tam_fuse` from the oracle over `cases` random shapes.
pub fn tam_oracle_deviation(cases: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..cases {
        let mut r = rng(seed);
        let dims: Vec<usize> = (0..5).map(|_| r.random_range(1..=3)).collect();
        let f = rand_tensor(&mut r, &dims);
        let w = Tensor::new(
            (0..dims[0] * dims[1] * dims[2])
                .map(|_| r.random_range(0.0..1.0))
                .collect(),
            &dims[..3],
        )
        .unwrap();
        let got = tam_fuse(&f, &w).unwrap();
        assert_eq!(got.shape(), &[dims[0], dims[2], dims[3], dims[4]]);
        for (a, b) in got.data().iter().zip(tam_fuse_oracle(&f, &w)) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

pub fn tagged_frames(n: usize) -> (Vec<Frame>, Vec<LabelVector>) {
    let tax = TripletTaxonomy::default();
    let id: Arc<str> = Arc::from("VID00");
    let frames = (0..n)
        .map(|i| Frame {
            image: Tensor::full(&[3, 1, 1], i as f32).unwrap(),
            video_id: id.clone(),
            index: i,
        })
        .collect();
    let labels = (0..n)
        .map(|i| LabelVector::from_active(&[i % 100], &tax).unwrap())
        .collect();
    (frames, labels)
}

/// Exhaustive comparison of `make_clips` with the clamped window
/// `[t - m + 1, t]`; returns the number of clips compared.
pub fn clip_oracle() -> Result<usize, String> {
    let mut checked = 0;
    for n in 1..=50usize {
        let (frames, labels) = tagged_frames(n);
        for m in [1usize, 4, 6, 8] {
            let clips = make_clips(&frames, &labels, m).map_err(|e| e.to_string())?;
            if clips.len() != n {
                return Err(format!("N={n} m={m}: {} clips", clips.len()));
            }
            for (t, c) in clips.iter().enumerate() {
                let want: Vec<usize> = (0..m)
                    .map(|j| (t as i64 - (m - 1 - j) as i64).max(0) as usize)
                    .collect();
                let got: Vec<usize> = c.frames.iter().map(|f| f.index).collect();
                let pixels: Vec<usize> = c
                    .frames
                    .iter()
                    .map(|f| f.image.data()[0] as usize)
                    .collect();
                if got != want || pixels != want || c.t != t || c.label != labels[t] {
                    return Err(format!(
                        "N={n} m={m} t={t}: frames {got:?}, expected {want:?}"
                    ));
                }
                if got.iter().max() != Some(&t) {
                    return Err(format!("N={n} m={m} t={t}: max index is not t"));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

/// Rank-counting AP: a positive ranks after every strictly higher score
/// and after equal scores that come earlier in the input.
pub fn ap_brute(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n = scores.len();
    let ahead = |i: usize, j: usize| scores[j] > scores[i] || (scores[j] == scores[i] && j < i);
    let pos: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
    if pos.is_empty() {
        return None;
    }
    let total: f64 = pos
        .iter()
        .map(|&i| {
            let rank = 1 + (0..n).filter(|&j| ahead(i, j)).count();
            let hits = 1 + pos.iter().filter(|&&j| ahead(i, j)).count();
            hits as f64 / rank as f64
        })
        .sum();
    Some(total / pos.len() as f64)
}

fn mean_defined(v: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let d: Vec<f64> = v.into_iter().flatten().collect();
    (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
}

/// `(scores, labels)` of one head for one frame, derived from the triplet
/// scores by a max over member triplets.
fn head_view(p: &FramePrediction, tax: &TripletTaxonomy, head: Head) -> (Vec<f64>, Vec<u8>) {
    let key = |k: usize| {
        let t = tax.triplet(k);
        match head {
            Head::I => t.instrument,
            Head::V => t.verb,
            Head::T => t.target,
            Head::IV => t.instrument * 10 + t.verb,
            Head::IT => t.instrument * 15 + t.target,
            Head::IVT => k,
        }
    };
    let classes = [6, 10, 15, 60, 90, 100][Head::ALL.iter().position(|&h| h == head).unwrap()];
    let mut s = vec![f64::NEG_INFINITY; classes];
    let mut l = vec![0u8; classes];
    for k in 0..100 {
        s[key(k)] = s[key(k)].max(p.scores[k]);
        if p.truth.triplet[k] == 1 {
            l[key(k)] = 1;
        }
    }
    (
        s.into_iter()
            .map(|v| if v == f64::NEG_INFINITY { 0.0 } else { v })
            .collect(),
        l,
    )
}

pub fn video_ap_brute(log: &PredictionLog, tax: &TripletTaxonomy, head: Head) -> Option<f64> {
    mean_defined(log.videos().map(|(_, seq)| {
        let rows: Vec<_> = seq.iter().map(|p| head_view(p, tax, head)).collect();
        let classes = rows[0].0.len();
        mean_defined((0..classes).map(|c| {
            let s: Vec<f64> = rows.iter().map(|r| r.0[c]).collect();
            let l: Vec<u8> = rows.iter().map(|r| r.1[c]).collect();
            ap_brute(&s, &l)
        }))
    }))
}

/// Score drawn from a coarse grid half of the time so ties are frequent.
fn tie_prone(r: &mut ChaCha8Rng) -> f64 {
    if r.random_bool(0.5) {
        f64::from(r.random_range(0..5u8)) / 4.0
    } else {
        r.random_range(0.0..1.0)
    }
}

fn option_gap(a: Option<f64>, b: Option<f64>) -> f64 {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs(),
        (None, None) => 0.0,
        _ => f64::INFINITY,
    }
}

/// Largest deviation of `average_precision` and `video_ap` from the brute
/// force over `cases` random instances. Mismatched definedness counts as
/// infinite.
pub fn ap_oracle_deviation(cases: u64) -> f64 {
    let tax = TripletTaxonomy::default();
    let mut worst: f64 = 0.0;
    for seed in 0..cases {
        let mut r = rng(1000 + seed);
        let n = r.random_range(1..=12);
        let classes = r.random_range(1..=5);
        for _ in 0..classes {
            let s: Vec<f64> = (0..n).map(|_| tie_prone(&mut r)).collect();
            let p = r.random_range(0.0..0.6);
            let l: Vec<u8> = (0..n).map(|_| r.random_bool(p) as u8).collect();
            worst = worst.max(option_gap(
                average_precision(&s, &l).unwrap(),
                ap_brute(&s, &l),
            ));
        }

        let pool: Vec<usize> = (0..classes).map(|_| r.random_range(0..100)).collect();
        let mut log = PredictionLog::new();
        for v in 0..r.random_range(1..=3) {
            for frame in 0..r.random_range(1..=12) {
                let active: Vec<usize> = pool
                    .iter()
                    .copied()
                    .filter(|_| r.random_bool(0.3))
                    .collect();
                let scores = (0..100).map(|_| tie_prone(&mut r)).collect();
                let truth = LabelVector::from_active(&active, &tax).unwrap();
                log.push(
                    &format!("VID{v:02}"),
                    FramePrediction {
                        frame,
                        scores,
                        truth,
                    },
                )
                .unwrap();
            }
        }
        let report = video_ap(&log, &tax).unwrap();
        for h in Head::ALL {
            worst = worst.max(option_gap(
                report.aggregate(h),
                video_ap_brute(&log, &tax, h),
            ));
        }
    }
    worst
}

/// For every `t`, frames after `t` are zeroed and the prediction at `t` must
/// keep every bit. Returns the number of positions checked.
pub fn causality_check() -> Result<usize, String> {
    let data = synth_generate(&bench_spec(1, 20), 5).map_err(|e| e.to_string())?;
    let fresh = TripletModel::<f32>::new(&bench_model(6), 11).map_err(|e| e.to_string())?;
    let bytes = fresh
        .to_checkpoint("x")
        .encode()
        .map_err(|e| e.to_string())?;
    let ckpt = gradtape::checkpoint::Checkpoint::decode(&bytes).map_err(|e| e.to_string())?;
    let (model, _) = TripletModel::<f32>::from_checkpoint(&ckpt).map_err(|e| e.to_string())?;
    let video = &data.videos[0];
    let full = predict_video(&model, video, 16).map_err(|e| e.to_string())?;
    for t in 0..video.len() {
        let mut cut: Video = video.clone();
        for f in &mut cut.frames[t + 1..] {
            f.image = Tensor::zeros(f.image.shape()).unwrap();
        }
        let part = predict_video(&model, &cut, 16).map_err(|e| e.to_string())?;
        let same = full[t]
            .iter()
            .zip(&part[t])
            .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            return Err(format!(
                "prediction at t={t} changed when later frames were zeroed"
            ));
        }
        if t + 1 < video.len() && full[t + 1] == part[t + 1] {
            return Err(format!(
                "zeroing frames after {t} left frame {} unchanged",
                t + 1
            ));
        }
    }
    Ok(video.len())
}
