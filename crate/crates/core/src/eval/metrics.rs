use crate::error::{Error, Result};
use crate::stats::{mean, midranks};

/// Rank-based ROC AUC (Mann-Whitney U over midranks).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), actual: scores.len() });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined("AUC needs both classes".into()));
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (pos as f64) * (pos as f64 + 1.0) / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r2(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::DimensionMismatch { expected: targets.len(), actual: preds.len() });
    }
    if targets.len() < 2 {
        return Err(Error::Undefined("R2 needs at least two targets".into()));
    }
    let m = mean(targets);
    let ss_tot: f64 = targets.iter().map(|t| (t - m) * (t - m)).sum();
    if !(ss_tot > 0.0) {
        return Err(Error::Undefined("R2 of constant targets".into()));
    }
    let ss_res: f64 = preds.iter().zip(targets).map(|(p, t)| (t - p) * (t - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}
