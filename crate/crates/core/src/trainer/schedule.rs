//! Per-batch learning-rate schedule: linear warm-up, then cosine annealing.

use std::f64::consts::PI;

use super::TrainConfig;

/// Learning rate for the `batch_index`-th optimizer step (0-based, counted
/// across epochs).
///
/// The first `warmup_epochs * batches_per_epoch` steps ramp linearly from
/// `init_lr` at step 0 to `peak_lr` at the last warm-up step. The cosine
/// phase starts from that peak and reaches `final_lr` at the last step of
/// the run; later steps stay at `final_lr`.
pub fn lr_schedule(batch_index: u64, batches_per_epoch: u64, cfg: &TrainConfig) -> f64 {
    let warmup = cfg.warmup_epochs as u64 * batches_per_epoch;
    let total = cfg.epochs as u64 * batches_per_epoch;
    if batch_index < warmup {
        if warmup == 1 {
            return cfg.peak_lr;
        }
        let p = batch_index as f64 / (warmup - 1) as f64;
        return cfg.init_lr * (1.0 - p) + cfg.peak_lr * p;
    }
    let start = warmup.saturating_sub(1);
    let span = total.saturating_sub(1).saturating_sub(start);
    if span == 0 {
        return cfg.final_lr;
    }
    let p = ((batch_index - start) as f64 / span as f64).min(1.0);
    cfg.final_lr + 0.5 * (cfg.peak_lr - cfg.final_lr) * (1.0 + (PI * p).cos())
}
