use super::config::RunConfig;
use crate::error::{Error, Result};

/// Linear warm-up from 0 over the first `warmup_fraction` of training, then
/// `base_lr * decay_gamma^e` where `e` counts whole epochs since warm-up ended.
pub fn lr_schedule(step: usize, total_steps: usize, config: &RunConfig) -> Result<f64> {
    let (wf, gamma) = (config.warmup_fraction, config.decay_gamma);
    if !(wf > 0.0 && wf < 1.0) || !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Config(format!(
            "warmup_fraction {wf} and decay_gamma {gamma} must lie in (0, 1)"
        )));
    }
    if step >= total_steps || config.epochs == 0 {
        return Err(Error::Config(format!(
            "step {step} outside a schedule of {total_steps} steps over {} epochs",
            config.epochs
        )));
    }
    let total = total_steps as f64;
    let p = step as f64 / total;
    if p < wf {
        return Ok(config.base_lr * p / wf);
    }
    let steps_per_epoch = total / config.epochs as f64;
    let e = ((step as f64 - wf * total) / steps_per_epoch + 1e-9).floor();
    Ok(config.base_lr * gamma.powf(e))
}
