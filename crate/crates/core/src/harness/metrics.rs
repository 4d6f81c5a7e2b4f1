//! Aggregate score metrics over runs.

use rand::Rng;

use crate::actor_critic::percentile;
use crate::error::{Error, Result};

/// `(raw − random) / (expert − random)`.
pub fn normalized_score(raw: f64, random_ref: f64, expert_ref: f64) -> Result<f64> {
    if !(expert_ref > random_ref) || !expert_ref.is_finite() || !random_ref.is_finite() {
        return Err(Error::invalid(format!(
            "degenerate normalization references: random {random_ref}, expert {expert_ref}"
        )));
    }
    Ok((raw - random_ref) / (expert_ref - random_ref))
}

/// Interquartile mean: drops `⌊n/4⌋` scores from each end of the sorted list.
pub fn iqm(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::invalid("iqm of no scores"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cut = sorted.len() / 4;
    Ok(shifted_mean(&sorted[cut..sorted.len() - cut]))
}

/// Mean taken relative to the first element, exact on constant data.
fn shifted_mean(xs: &[f64]) -> f64 {
    let base = xs[0];
    base + xs.iter().map(|x| x - base).sum::<f64>() / xs.len() as f64
}

pub fn mean(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::invalid("mean of no scores"));
    }
    Ok(shifted_mean(scores))
}

/// Mean shortfall below `threshold`.
pub fn optimality_gap(scores: &[f64], threshold: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::invalid("optimality gap of no scores"));
    }
    Ok(scores.iter().map(|s| (threshold - s).max(0.0)).sum::<f64>() / scores.len() as f64)
}

/// Percentile bootstrap interval of `metric` over all scores, resampling
/// seeds within each environment independently.
pub fn stratified_bootstrap_ci<R, F>(
    per_env: &[Vec<f64>],
    metric: F,
    resamples: usize,
    level: f64,
    rng: &mut R,
) -> Result<(f64, f64)>
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> Result<f64>,
{
    if per_env.is_empty() || per_env.iter().any(|s| s.len() < 2) {
        return Err(Error::invalid("bootstrap needs at least two seeds per environment"));
    }
    if resamples == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("bootstrap needs resamples > 0 and level in (0, 1)"));
    }
    let total: usize = per_env.iter().map(Vec::len).sum();
    let mut draw = Vec::with_capacity(total);
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        draw.clear();
        for scores in per_env {
            draw.extend((0..scores.len()).map(|_| scores[rng.random_range(0..scores.len())]));
        }
        stats.push(metric(&draw)?);
    }
    let tail = (1.0 - level) / 2.0 * 100.0;
    Ok((percentile(&stats, tail)?, percentile(&stats, 100.0 - tail)?))
}
