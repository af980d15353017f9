use std::path::{Path, PathBuf};
use std::sync::mpsc::sync_channel;
use std::time::Instant;

use gradtape::{Ctx, ParamStore, Real, Tensor};

use super::config::RunConfig;
use super::schedule::lr_schedule;
use crate::datapipe::{augment, stack_clips, BatchSampler, ClipRef, Dataset};
use crate::error::{Error, Result};
use crate::labels::LabelVector;
use crate::model::TripletModel;
use crate::objective::{model_loss, HeadWeights};
use crate::table::Table;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// batch means over the epoch
    pub total: f64,
    pub instrument: f64,
    pub verb: f64,
    pub target: f64,
    pub triplet: f64,
    /// rate used by the epoch's last step
    pub lr: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub checkpoint: Option<PathBuf>,
}

impl TrainLog {
    pub fn table(&self) -> Table {
        let mut t = Table::new([
            "epoch",
            "total",
            "instrument",
            "verb",
            "target",
            "triplet",
            "lr",
            "seconds",
        ]);
        for r in &self.epochs {
            t.push(vec![
                r.epoch.to_string(),
                format!("{:.6}", r.total),
                format!("{:.6}", r.instrument),
                format!("{:.6}", r.verb),
                format!("{:.6}", r.target),
                format!("{:.6}", r.triplet),
                format!("{:.6e}", r.lr),
                format!("{:.2}", r.wall_seconds),
            ]);
        }
        t
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TripletModel<f32>,
    pub taxonomy_digest: String,
    pub log: TrainLog,
}

/// `p <- p - lr * (grad + weight_decay * p)`; parameters without a gradient
/// only decay.
pub fn sgd_step<T: Real>(store: &mut ParamStore<T>, lr: f64, weight_decay: f64) -> Result<()> {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let p = store.get(id);
        let g = p.grad();
        let next: Vec<T> = p
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let gi = g.as_ref().map_or(0.0, |g| g[i].as_f64());
                T::cast(v.as_f64() - lr * (gi + weight_decay * v.as_f64()))
            })
            .collect();
        store.set_values(id, next)?;
    }
    Ok(())
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Epoch batches with any trailing batch too small for batch statistics
/// (fewer than two frames) folded into its predecessor.
fn plan_epoch(sampler: &BatchSampler<'_>, epoch: u64, m: usize) -> Vec<Vec<ClipRef>> {
    let mut batches = sampler.batch_refs(epoch);
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() * m < 2) {
        let last = batches.pop().expect("non-empty");
        batches.last_mut().expect("len > 1").extend(last);
    }
    batches
}

type Prepared = (Tensor<f32>, Vec<LabelVector>);

fn prepare(
    sampler: &BatchSampler<'_>,
    refs: &[ClipRef],
    cfg: &RunConfig,
    epoch: u64,
    first: usize,
) -> Result<Prepared> {
    let clips: Vec<_> = refs
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let c = sampler.clip(r);
            if cfg.augment {
                augment(&c, mix(cfg.seed, (epoch << 32) | (first + i) as u64))
            } else {
                c
            }
        })
        .collect();
    let labels = clips.iter().map(|c| c.label.clone()).collect();
    Ok((stack_clips(&clips)?, labels))
}

fn write_checkpoint(model: &TripletModel<f32>, digest: &str, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    model
        .to_checkpoint(digest)
        .write_atomic(path)
        .map_err(|e| Error::io(path, e))
}

/// Trains from the seeded initialization. With `out_dir`, writes
/// `checkpoint.bin` at the end and `checkpoint-epochNNNN.bin` every
/// `checkpoint_every` epochs.
pub fn train(config: &RunConfig, data: &Dataset, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    config.validate()?;
    let digest = data.taxonomy.digest();
    let mut model = TripletModel::<f32>::new(&config.model, config.seed)?;
    let weights = HeadWeights::from_labels(data.labels())?;
    let m = config.model.clip_size;
    let sampler = BatchSampler::new(data, m, config.batch, config.seed)?;
    let plans: Vec<Vec<Vec<ClipRef>>> = (0..config.epochs)
        .map(|e| plan_epoch(&sampler, e as u64, m))
        .collect();
    let total_steps: usize = plans.iter().map(Vec::len).sum();
    let mut log = TrainLog::default();
    let mut step = 0;

    for (epoch, plan) in plans.iter().enumerate() {
        let started = Instant::now();
        let mut sums = [0.0f64; 5];
        let mut lr = 0.0;
        let mut run_step = |model: &mut TripletModel<f32>, (x, labels): Prepared| -> Result<()> {
            lr = lr_schedule(step, total_steps, config)?;
            let mut ctx = Ctx::train();
            let out = model.forward(&x, &mut ctx)?;
            let loss = model_loss(&out.decoder, &labels, &weights).map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("epoch {epoch} step {step}: {msg}")),
                other => other,
            })?;
            loss.total.backward()?;
            sgd_step(&mut model.store, lr, config.weight_decay)?;
            model.store.apply(&mut ctx);
            let total = loss.total.data()[0].as_f64();
            for (s, v) in
                sums.iter_mut()
                    .zip([total, loss.instrument, loss.verb, loss.target, loss.triplet])
            {
                *s += v;
            }
            step += 1;
            Ok(())
        };
        let offsets: Vec<usize> = plan
            .iter()
            .scan(0, |acc, b| {
                let o = *acc;
                *acc += b.len();
                Some(o)
            })
            .collect();
        if config.deterministic {
            for (b, &o) in plan.iter().zip(&offsets) {
                run_step(&mut model, prepare(&sampler, b, config, epoch as u64, o)?)?;
            }
        } else {
            // A worker assembles batches ahead of the optimizer, in plan order.
            std::thread::scope(|s| -> Result<()> {
                let (tx, rx) = sync_channel::<Result<Prepared>>(2);
                let sampler = &sampler;
                s.spawn(move || {
                    for (b, &o) in plan.iter().zip(&offsets) {
                        if tx
                            .send(prepare(sampler, b, config, epoch as u64, o))
                            .is_err()
                        {
                            break;
                        }
                    }
                });
                for prepared in rx {
                    run_step(&mut model, prepared?)?;
                }
                Ok(())
            })?;
        }
        let n = plan.len().max(1) as f64;
        log.epochs.push(EpochRecord {
            epoch,
            total: sums[0] / n,
            instrument: sums[1] / n,
            verb: sums[2] / n,
            target: sums[3] / n,
            triplet: sums[4] / n,
            lr,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
        log::info!("epoch {epoch}: loss {:.4} lr {lr:.3e}", sums[0] / n);
        if let Some(dir) = out_dir {
            if config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 {
                write_checkpoint(
                    &model,
                    &digest,
                    &dir.join(format!("checkpoint-epoch{:04}.bin", epoch + 1)),
                )?;
            }
        }
    }

    if let Some(dir) = out_dir {
        let path = dir.join("checkpoint.bin");
        write_checkpoint(&model, &digest, &path)?;
        log.checkpoint = Some(path);
    }
    Ok(TrainOutcome {
        model,
        taxonomy_digest: digest,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_matches_hand_step() {
        let mut store = ParamStore::<f64>::new();
        let a = store.add_param("a", vec![1.0], &[1]).unwrap();
        let b = store.add_param("b", vec![-2.0], &[1]).unwrap();
        // loss = 3a + b^2 -> grads (3, -4)
        let loss = store
            .get(a)
            .scale(3.0)
            .add(&store.get(b).square())
            .unwrap()
            .sum();
        loss.backward().unwrap();
        sgd_step(&mut store, 0.1, 0.01).unwrap();
        assert!((store.get(a).data()[0] - (1.0 - 0.1 * (3.0 + 0.01))).abs() < 1e-15);
        assert!((store.get(b).data()[0] - (-2.0 - 0.1 * (-4.0 - 0.02))).abs() < 1e-15);
        assert!(store.get(a).requires_grad());
    }

    #[test]
    fn mix_spreads_bits() {
        assert_ne!(mix(0, 1), mix(0, 2));
        assert_ne!(mix(1, 0), mix(2, 0));
    }
}
