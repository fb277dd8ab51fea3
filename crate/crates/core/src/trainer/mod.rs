//! Mini-batch training: shuffled epochs, AdamW, warm-up plus cosine
//! learning rate, validation-driven checkpointing.

mod checkpoint;
mod optim;
mod schedule;

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use optim::AdamW;
pub use schedule::lr_schedule;

use crate::config::RunConfig;
use crate::encoder::ModelConfig;
use crate::error::{Error, Result};
use crate::head::{predict_backward, predict_prepared, ModelParams, PreparedComplex};
use crate::losses::{total_loss, LossConfig};
use crate::metrics::MetricReport;
use crate::structio::{DatasetManifest, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub peak_lr: f64,
    pub init_lr: f64,
    pub warmup_epochs: usize,
    pub weight_decay: f64,
    pub final_lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 16,
            peak_lr: 0.01,
            init_lr: 1e-6,
            warmup_epochs: 2,
            weight_decay: 1e-4,
            final_lr: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.warmup_epochs >= self.epochs {
            return bad("warmup_epochs must be smaller than epochs");
        }
        let rates = [self.peak_lr, self.init_lr, self.final_lr, self.weight_decay];
        if rates.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return bad("learning rates and weight_decay must be finite and non-negative");
        }
        if !(self.init_lr > 0.0 && self.init_lr <= self.peak_lr) {
            return bad("need 0 < init_lr <= peak_lr");
        }
        if self.final_lr > self.peak_lr {
            return bad("final_lr must not exceed peak_lr");
        }
        Ok(())
    }
}

/// A prepared complex with its manifest id.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub prep: PreparedComplex,
}

impl Sample {
    fn label(&self) -> Result<f64> {
        self.prep
            .label()
            .ok_or_else(|| Error::InvalidInput(format!("complex `{}` has no label", self.id)))
    }
}

/// Loads one split of a manifest and precomputes graphs and frames.
pub fn load_samples(manifest: &DatasetManifest, split: Split, cfg: &ModelConfig) -> Result<Vec<Sample>> {
    manifest
        .load_split(split, cfg.pocket_residues)
        .into_par_iter()
        .map(|(entry, pc)| {
            let id = entry.id.clone();
            let prep = pc
                .and_then(|pc| PreparedComplex::new(pc, cfg))
                .map_err(|e| Error::InvalidInput(format!("complex `{id}`: {e}")))?;
            Ok(Sample { id, prep })
        })
        .collect()
}

/// Everything that evolves during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub params: ModelParams<f64>,
    pub optimizer: AdamW,
    /// Optimizer steps taken so far, across epochs.
    pub global_batch: u64,
    /// Completed epochs.
    pub epoch: usize,
    /// Best validation Pearson seen; undefined correlations count as -inf.
    pub best_val_pearson: Option<f64>,
}

impl TrainState {
    pub fn new(model: &ModelConfig, train: &TrainConfig, loss: &LossConfig) -> Self {
        let params = ModelParams::init(train.seed, model, loss.noise_sigma2);
        let optimizer = AdamW::new(&params);
        TrainState {
            params,
            optimizer,
            global_batch: 0,
            epoch: 0,
            best_val_pearson: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// Mean loss over complexes.
    pub loss: f64,
    pub rmse: f64,
    pub pearson: Option<f64>,
    /// Learning rate of the epoch's last step; `None` for evaluation.
    pub lr: Option<f64>,
}

pub fn batches_per_epoch(n: usize, batch_size: usize) -> u64 {
    n.div_ceil(batch_size) as u64
}

fn predict_batch(batch: &[&Sample], params: &ModelParams<f64>, cfg: &ModelConfig) -> Result<Vec<f64>> {
    batch
        .par_iter()
        .map(|s| {
            let a = predict_prepared(&s.prep, params, cfg)?.affinity;
            if a.is_finite() {
                Ok(a)
            } else {
                Err(Error::Numerical(format!("non-finite prediction for complex `{}`", s.id)))
            }
        })
        .collect()
}

/// Loss and parameter gradient of one batch.
pub fn batch_gradient(
    batch: &[&Sample],
    params: &ModelParams<f64>,
    model: &ModelConfig,
    loss_cfg: &LossConfig,
) -> Result<(f64, Vec<f64>, ModelParams<f64>)> {
    let preds = predict_batch(batch, params, model)?;
    let labels = batch.iter().map(|s| s.label()).collect::<Result<Vec<_>>>()?;
    let loss = total_loss(&preds, &labels, params.log_noise_var(), loss_cfg)?;
    if !loss.value.is_finite() {
        let ids: Vec<&str> = batch.iter().map(|s| s.id.as_str()).collect();
        return Err(Error::Numerical(format!("non-finite loss on batch [{}]", ids.join(", "))));
    }
    let parts = batch
        .par_iter()
        .zip(loss.d_pred.par_iter())
        .map(|(s, &d)| {
            let mut g = params.zeros_like();
            predict_backward(&s.prep, params, model, d, &mut g)?;
            Ok(g)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grad = params.zeros_like();
    for g in &parts {
        grad.add_assign(g);
    }
    grad.log_noise_var[0] = loss.d_log_noise_var;
    if !grad.is_finite() {
        return Err(Error::Numerical(format!("non-finite gradient on batch starting at `{}`", batch[0].id)));
    }
    Ok((loss.value, preds, grad))
}

/// Runs one shuffled pass over `samples` and advances `state`.
pub fn train_epoch(state: &mut TrainState, samples: &[Sample], cfg: &RunConfig) -> Result<EpochMetrics> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("training split is empty".into()));
    }
    let bs = cfg.train.batch_size;
    let bpe = batches_per_epoch(samples.len(), bs);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    rng.set_stream(state.epoch as u64 + 1);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);

    let mut preds = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    let mut loss_sum = 0.0;
    let mut lr = 0.0;
    for chunk in order.chunks(bs) {
        let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
        lr = lr_schedule(state.global_batch, bpe, &cfg.train);
        let (loss, p, grad) = batch_gradient(&batch, &state.params, &cfg.model, &cfg.loss)?;
        state.optimizer.update(&mut state.params, &grad, lr, cfg.train.weight_decay);
        if !state.params.is_finite() {
            return Err(Error::Numerical(format!("parameters diverged at step {}", state.global_batch)));
        }
        state.global_batch += 1;
        loss_sum += loss * batch.len() as f64;
        preds.extend(p);
        for s in &batch {
            labels.push(s.label()?);
        }
    }
    state.epoch += 1;
    let report = MetricReport::compute(&preds, &labels)?;
    Ok(EpochMetrics {
        loss: loss_sum / samples.len() as f64,
        rmse: report.rmse,
        pearson: report.pearson,
        lr: Some(lr),
    })
}

/// Predictions in sample order.
pub fn predict_samples(samples: &[Sample], params: &ModelParams<f64>, cfg: &ModelConfig) -> Result<Vec<f64>> {
    let refs: Vec<&Sample> = samples.iter().collect();
    predict_batch(&refs, params, cfg)
}

/// Loss (in fixed, unshuffled batches) and metrics without updating anything.
pub fn evaluate(samples: &[Sample], params: &ModelParams<f64>, cfg: &RunConfig) -> Result<(Vec<f64>, EpochMetrics)> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("evaluation split is empty".into()));
    }
    let preds = predict_samples(samples, params, &cfg.model)?;
    let labels = samples.iter().map(Sample::label).collect::<Result<Vec<_>>>()?;
    let mut loss_sum = 0.0;
    for (p, l) in preds.chunks(cfg.train.batch_size).zip(labels.chunks(cfg.train.batch_size)) {
        loss_sum += total_loss(p, l, params.log_noise_var(), &cfg.loss)?.value * p.len() as f64;
    }
    let report = MetricReport::compute(&preds, &labels)?;
    Ok((
        preds,
        EpochMetrics {
            loss: loss_sum / samples.len() as f64,
            rmse: report.rmse,
            pearson: report.pearson,
            lr: None,
        },
    ))
}

pub const METRICS_HEADER: &str = "epoch,split,loss,rmse,pearson,lr";

fn metrics_row(epoch: usize, split: Split, m: &EpochMetrics, lr: f64) -> String {
    let pearson = m.pearson.map(|p| p.to_string()).unwrap_or_default();
    format!("{epoch},{split},{},{},{pearson},{lr}", m.loss, m.rmse)
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Most recent checkpoint written on a validation improvement.
    pub best_checkpoint: PathBuf,
    pub history: Vec<(EpochMetrics, EpochMetrics)>,
    pub state: TrainState,
}

/// Trains on the `train` split, validates on `val` after every epoch, and
/// writes `checkpoint_epoch_NNNN.json` whenever validation Pearson improves
/// (always after the first epoch). Passing `resume` continues from a saved
/// state, keeping its learning-rate position.
pub fn fit(
    train: &[Sample],
    val: &[Sample],
    cfg: &RunConfig,
    out_dir: &Path,
    resume: Option<Checkpoint>,
) -> Result<FitOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidInput("train and val splits must both be non-empty".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut state = match resume {
        Some(ck) => {
            if ck.config.model != cfg.model {
                return Err(Error::Checkpoint("checkpoint model settings differ from the configuration".into()));
            }
            ck.state
        }
        None => TrainState::new(&cfg.model, &cfg.train, &cfg.loss),
    };
    let metrics_path = out_dir.join("metrics.csv");
    let fresh = !metrics_path.exists();
    let mut metrics = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&metrics_path)
        .map_err(|e| Error::io(&metrics_path, e))?;
    let mut write_line = |line: &str| writeln!(metrics, "{line}").map_err(|e| Error::io(&metrics_path, e));
    if fresh {
        write_line(METRICS_HEADER)?;
    }

    let mut best_checkpoint = None;
    let mut history = Vec::new();
    while state.epoch < cfg.train.epochs {
        let tm = train_epoch(&mut state, train, cfg)?;
        let lr = tm.lr.unwrap_or_default();
        let (_, vm) = evaluate(val, &state.params, cfg)?;
        write_line(&metrics_row(state.epoch, Split::Train, &tm, lr))?;
        write_line(&metrics_row(state.epoch, Split::Val, &vm, lr))?;
        log::info!(
            "epoch {} train loss {:.4} rmse {:.4} | val rmse {:.4} pearson {}",
            state.epoch,
            tm.loss,
            tm.rmse,
            vm.rmse,
            vm.pearson.map(|p| format!("{p:.4}")).unwrap_or_else(|| "undefined".into())
        );
        let score = vm.pearson.unwrap_or(f64::NEG_INFINITY);
        let improved = match state.best_val_pearson {
            None => true,
            Some(best) => score > best,
        };
        if improved {
            state.best_val_pearson = Some(score);
            let path = out_dir.join(format!("checkpoint_epoch_{:04}.json", state.epoch));
            Checkpoint::new(cfg.clone(), state.clone()).save(&path)?;
            best_checkpoint = Some(path);
        }
        history.push((tm, vm));
    }
    let best_checkpoint = match best_checkpoint {
        Some(p) => p,
        None => latest_checkpoint(out_dir)?
            .ok_or_else(|| Error::Checkpoint("no checkpoint was written".into()))?,
    };
    Ok(FitOutcome {
        best_checkpoint,
        history,
        state,
    })
}

/// The highest-epoch checkpoint in `dir`, if any.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<PathBuf>> {
    let mut found: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("checkpoint_epoch_") && n.ends_with(".json"))
        })
        .collect();
    found.sort();
    Ok(found.pop())
}
