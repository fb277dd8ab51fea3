//! Flat `key = value` configuration files covering the model, training,
//! and loss settings. `#` starts a comment. Unknown or repeated keys are
//! errors; omitted keys keep their defaults.

use std::collections::HashSet;
use std::fmt::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderSharing, Framework, ModelConfig};
use crate::error::{Error, Result};
use crate::losses::LossConfig;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub loss: LossConfig,
}

impl FromStr for EncoderSharing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "shared" => Ok(EncoderSharing::Shared),
            "separate" => Ok(EncoderSharing::Separate),
            other => Err(Error::Config(format!("unknown encoder_sharing `{other}`"))),
        }
    }
}

impl FromStr for Framework {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "difference" => Ok(Framework::Difference),
            "complex_only" => Ok(Framework::ComplexOnly),
            other => Err(Error::Config(format!("unknown framework `{other}`"))),
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str, line: usize) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("line {line}: invalid value `{raw}` for `{key}`")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, raw) = content
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected `key = value`")))?;
            let key = key.trim();
            let raw = raw.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {line}: `{key}` set twice")));
            }
            let (m, t, l) = (&mut cfg.model, &mut cfg.train, &mut cfg.loss);
            match key {
                "hidden_dim" => m.hidden_dim = value(key, raw, line)?,
                "num_layers" => m.num_layers = value(key, raw, line)?,
                "rbf_count" => m.rbf_count = value(key, raw, line)?,
                "rbf_cutoff" => m.rbf_cutoff = value(key, raw, line)?,
                "graph_cutoff" => m.graph_cutoff = value(key, raw, line)?,
                "pocket_residues" => m.pocket_residues = value(key, raw, line)?,
                "frame_mode" => m.frame_mode = raw.parse()?,
                "encoder_sharing" => m.encoder_sharing = raw.parse()?,
                "framework" => m.framework = raw.parse()?,
                "epochs" => t.epochs = value(key, raw, line)?,
                "batch_size" => t.batch_size = value(key, raw, line)?,
                "peak_lr" => t.peak_lr = value(key, raw, line)?,
                "init_lr" => t.init_lr = value(key, raw, line)?,
                "warmup_epochs" => t.warmup_epochs = value(key, raw, line)?,
                "weight_decay" => t.weight_decay = value(key, raw, line)?,
                "final_lr" => t.final_lr = value(key, raw, line)?,
                "seed" => t.seed = value(key, raw, line)?,
                "noise_sigma2" => l.noise_sigma2 = value(key, raw, line)?,
                "rank_alpha" => l.rank_alpha = value(key, raw, line)?,
                "ndcg_temperature" => l.ndcg_temperature = value(key, raw, line)?,
                "ndcg_gain" => l.ndcg_gain = raw.parse()?,
                other => return Err(Error::Config(format!("line {line}: unknown key `{other}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.loss.validate()
    }

    /// Serializes every key with its unit in a trailing comment.
    pub fn render(&self) -> String {
        let (m, t, l) = (&self.model, &self.train, &self.loss);
        let mut s = String::new();
        let mut kv = |k: &str, v: String, note: &str| {
            writeln!(s, "{k} = {v}  # {note}").expect("writing to a String cannot fail");
        };
        kv("hidden_dim", m.hidden_dim.to_string(), "feature width");
        kv("num_layers", m.num_layers.to_string(), "message-passing layers");
        kv("rbf_count", m.rbf_count.to_string(), "Gaussian basis functions");
        kv("rbf_cutoff", m.rbf_cutoff.to_string(), "Å, last basis centre");
        kv("graph_cutoff", m.graph_cutoff.to_string(), "Å, inclusive radius-graph cutoff");
        kv("pocket_residues", m.pocket_residues.to_string(), "residues kept around the ligand");
        kv("frame_mode", m.frame_mode.to_string(), "SE3 | E3 | NONE");
        kv(
            "encoder_sharing",
            match m.encoder_sharing {
                EncoderSharing::Shared => "shared",
                EncoderSharing::Separate => "separate",
            }
            .into(),
            "shared | separate",
        );
        kv(
            "framework",
            match m.framework {
                Framework::Difference => "difference",
                Framework::ComplexOnly => "complex_only",
            }
            .into(),
            "difference | complex_only",
        );
        kv("epochs", t.epochs.to_string(), "passes over the training split");
        kv("batch_size", t.batch_size.to_string(), "complexes per step");
        kv("peak_lr", format!("{:e}", t.peak_lr), "learning rate after warm-up");
        kv("init_lr", format!("{:e}", t.init_lr), "learning rate at batch 0");
        kv("warmup_epochs", t.warmup_epochs.to_string(), "epochs of linear warm-up");
        kv("weight_decay", format!("{:e}", t.weight_decay), "decoupled, per step");
        kv("final_lr", format!("{:e}", t.final_lr), "learning rate at the last batch");
        kv("seed", t.seed.to_string(), "initialisation and shuffling");
        kv("noise_sigma2", format!("{:e}", l.noise_sigma2), "pK², initial balanced-MSE noise variance");
        kv("rank_alpha", format!("{:e}", l.rank_alpha), "rank-loss amplification");
        kv("ndcg_temperature", format!("{:e}", l.ndcg_temperature), "pK, smooth-rank temperature");
        kv("ndcg_gain", l.ndcg_gain.to_string(), "linear | exponential");
        s
    }
}
