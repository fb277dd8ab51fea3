//! Training objectives: balanced MSE with a learnable noise variance, a
//! smooth NDCG surrogate, and its exponentially amplified rank loss.
//!
//! Each loss comes with its analytic gradient; the total loss reports
//! `d loss / d prediction` and `d loss / d log(noise variance)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::sigmoid;

/// How labels become NDCG gains. Both subtract the batch minimum first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NdcgGain {
    Linear,
    /// `2^g - 1`.
    Exponential,
}

impl std::str::FromStr for NdcgGain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(NdcgGain::Linear),
            "exponential" | "exp" => Ok(NdcgGain::Exponential),
            other => Err(Error::Config(format!("unknown ndcg gain `{other}`"))),
        }
    }
}

impl std::fmt::Display for NdcgGain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NdcgGain::Linear => "linear",
            NdcgGain::Exponential => "exponential",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Initial noise variance (pK²); trained as `log sigma²`.
    pub noise_sigma2: f64,
    pub rank_alpha: f64,
    /// Smooth-rank temperature, pK.
    pub ndcg_temperature: f64,
    pub ndcg_gain: NdcgGain,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            noise_sigma2: 1.0,
            rank_alpha: 1.0,
            ndcg_temperature: 1.0,
            ndcg_gain: NdcgGain::Linear,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("noise_sigma2", self.noise_sigma2),
            ("rank_alpha", self.rank_alpha),
            ("ndcg_temperature", self.ndcg_temperature),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_batch(pred: &[f64], labels: &[f64]) -> Result<()> {
    if pred.len() != labels.len() {
        return Err(Error::LengthMismatch(pred.len(), labels.len()));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    Ok(())
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Value and gradients of a loss over one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub d_pred: Vec<f64>,
    pub d_log_noise_var: f64,
}

/// Batch estimate of balanced MSE: for each sample, the negative log of a
/// softmax over all batch labels with logits `-(pred_i - y_j)^2 / (2 sigma²)`,
/// averaged over the batch.
pub fn balanced_mse(pred: &[f64], labels: &[f64], log_noise_var: f64) -> Result<f64> {
    Ok(balanced_mse_grad(pred, labels, log_noise_var)?.value)
}

pub fn balanced_mse_grad(pred: &[f64], labels: &[f64], log_noise_var: f64) -> Result<LossGrad> {
    check_batch(pred, labels)?;
    let b = pred.len();
    let inv_var = (-log_noise_var).exp();
    let mut value = 0.0;
    let mut d_pred = vec![0.0; b];
    let mut d_log_noise_var = 0.0;
    let mut logits = vec![0.0; b];
    for i in 0..b {
        for (j, l) in logits.iter_mut().enumerate() {
            *l = -0.5 * (pred[i] - labels[j]).powi(2) * inv_var;
        }
        let lse = log_sum_exp(&logits);
        value += lse - logits[i];
        // d/dpred_i of (lse - logit_i) with softmax weights p_ij.
        let mut g = (pred[i] - labels[i]) * inv_var;
        let mut gs = logits[i];
        for j in 0..b {
            let p = (logits[j] - lse).exp();
            g -= p * (pred[i] - labels[j]) * inv_var;
            gs -= p * logits[j];
        }
        // logit_j = -a_ij e^{-s}, so d logit_j / ds = -logit_j.
        d_pred[i] = g / b as f64;
        d_log_noise_var += gs / b as f64;
    }
    Ok(LossGrad {
        value: value / b as f64,
        d_pred,
        d_log_noise_var,
    })
}

fn gains(labels: &[f64], kind: NdcgGain) -> Vec<f64> {
    let min = labels.iter().copied().fold(f64::INFINITY, f64::min);
    labels
        .iter()
        .map(|y| {
            let g = y - min;
            match kind {
                NdcgGain::Linear => g,
                NdcgGain::Exponential => g.exp2() - 1.0,
            }
        })
        .collect()
}

fn ideal_dcg(gains: &[f64]) -> f64 {
    let mut sorted = gains.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted
        .iter()
        .enumerate()
        .map(|(k, g)| g / (2.0 + k as f64).log2())
        .sum()
}

/// Smooth NDCG: ranks are `1 + sum_{j != i} sigmoid((pred_j - pred_i) / tau)`,
/// normalised by the DCG of the exact ideal ordering. Returns 1 when all
/// labels are equal.
pub fn approx_ndcg(pred: &[f64], labels: &[f64], temperature: f64, gain: NdcgGain) -> Result<f64> {
    Ok(approx_ndcg_grad(pred, labels, temperature, gain)?.0)
}

/// NDCG and its gradient w.r.t. the predictions.
pub fn approx_ndcg_grad(pred: &[f64], labels: &[f64], temperature: f64, gain: NdcgGain) -> Result<(f64, Vec<f64>)> {
    check_batch(pred, labels)?;
    let b = pred.len();
    if b < 2 {
        return Err(Error::InvalidInput("approximate NDCG needs at least two samples".into()));
    }
    let g = gains(labels, gain);
    let idcg = ideal_dcg(&g);
    if idcg == 0.0 {
        return Ok((1.0, vec![0.0; b]));
    }
    let ln2 = std::f64::consts::LN_2;
    let mut ranks = vec![1.0; b];
    for i in 0..b {
        for j in 0..b {
            if j != i {
                ranks[i] += sigmoid((pred[j] - pred[i]) / temperature);
            }
        }
    }
    let dcg: f64 = (0..b).map(|i| g[i] / (1.0 + ranks[i]).log2()).sum();

    let mut grad = vec![0.0; b];
    for i in 0..b {
        let l = (1.0 + ranks[i]).ln();
        let d_rank = -g[i] * ln2 / (l * l * (1.0 + ranks[i]));
        if d_rank == 0.0 {
            continue;
        }
        for j in 0..b {
            if j != i {
                let s = sigmoid((pred[j] - pred[i]) / temperature);
                let ds = s * (1.0 - s) / temperature;
                grad[j] += d_rank * ds;
                grad[i] -= d_rank * ds;
            }
        }
    }
    for v in &mut grad {
        *v /= idcg;
    }
    Ok((dcg / idcg, grad))
}

/// `exp(alpha (1 - ndcg)) - 1 - alpha (1 - ndcg)`.
pub fn rank_loss(ndcg: f64, alpha: f64) -> f64 {
    let x = alpha * (1.0 - ndcg);
    x.exp_m1() - x
}

/// d rank_loss / d ndcg.
pub fn rank_loss_grad(ndcg: f64, alpha: f64) -> f64 {
    -alpha * (alpha * (1.0 - ndcg)).exp_m1()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    pub balanced_mse: f64,
    pub rank: f64,
    /// `None` for singleton batches.
    pub ndcg: Option<f64>,
    pub d_pred: Vec<f64>,
    pub d_log_noise_var: f64,
}

/// Balanced MSE plus rank loss; the rank term is zero for a batch of one.
pub fn total_loss(pred: &[f64], labels: &[f64], log_noise_var: f64, cfg: &LossConfig) -> Result<TotalLoss> {
    let bmse = balanced_mse_grad(pred, labels, log_noise_var)?;
    let mut d_pred = bmse.d_pred;
    let (rank, ndcg) = if pred.len() >= 2 {
        let (ndcg, d_ndcg) = approx_ndcg_grad(pred, labels, cfg.ndcg_temperature, cfg.ndcg_gain)?;
        let scale = rank_loss_grad(ndcg, cfg.rank_alpha);
        for (d, g) in d_pred.iter_mut().zip(d_ndcg) {
            *d += scale * g;
        }
        (rank_loss(ndcg, cfg.rank_alpha), Some(ndcg))
    } else {
        (0.0, None)
    };
    Ok(TotalLoss {
        value: bmse.value + rank,
        balanced_mse: bmse.value,
        rank,
        ndcg,
        d_pred,
        d_log_noise_var: bmse.d_log_noise_var,
    })
}
