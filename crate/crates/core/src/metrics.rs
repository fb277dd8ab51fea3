//! Regression metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse: f64,
    /// `None` when either vector is constant or there are fewer than two values.
    pub pearson: Option<f64>,
    pub n: usize,
}

impl MetricReport {
    pub fn compute(predictions: &[f64], labels: &[f64]) -> Result<Self> {
        let rmse = metric_rmse(predictions, labels)?;
        let pearson = metric_pearson(predictions, labels).ok();
        Ok(MetricReport {
            rmse,
            pearson,
            n: predictions.len(),
        })
    }
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::InvalidInput("metric over zero samples".into()));
    }
    Ok(())
}

pub fn metric_rmse(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(predictions, labels)?;
    let sse: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

/// Product-moment correlation.
pub fn metric_pearson(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    check_lengths(predictions, labels)?;
    if predictions.len() < 2 {
        return Err(Error::InvalidInput("pearson needs at least two samples".into()));
    }
    let n = predictions.len() as f64;
    let mp = predictions.iter().sum::<f64>() / n;
    let my = labels.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, y) in predictions.iter().zip(labels) {
        let (dp, dy) = (p - mp, y - my);
        sxy += dp * dy;
        sxx += dp * dp;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedMetric("predictions are constant".into()));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedMetric("labels are constant".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
