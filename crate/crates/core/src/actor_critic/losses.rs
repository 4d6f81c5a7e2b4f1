use super::scale::ScaleStats;
use crate::approx::{log_softmax, two_hot_encode, Bins, Mlp, ParamVector, StatePass};
use crate::error::{Error, Result};
use crate::guide::GuideTarget;

/// Smallest probability allowed inside a log.
pub const LOG_PROB_FLOOR: f64 = 1e-12;

/// One training sample drawn from a replay window.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSample {
    pub state: usize,
    pub action: usize,
    /// λ-return target built from the agent's own critic.
    pub target: f64,
    /// Critic expected value at `state`, used as the baseline.
    pub value: f64,
    pub guide: Option<GuideTarget>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Batch mean of |per-sample term|.
    pub mean_abs: f64,
    /// Samples whose action probability hit [`LOG_PROB_FLOOR`].
    pub clamped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticLossConfig {
    /// Weight of the cross-entropy pull toward the EMA critic.
    pub ema_regularizer: f64,
}

impl Default for CriticLossConfig {
    fn default() -> Self {
        Self { ema_regularizer: 1.0 }
    }
}

pub(crate) fn cross_entropy(target: &[f64], log_probs: &[f64]) -> f64 {
    -target
        .iter()
        .zip(log_probs)
        .filter(|(t, _)| **t != 0.0)
        .map(|(t, lp)| t * lp)
        .sum::<f64>()
}

pub(crate) fn check_target(value: f64, index: usize, state: usize, what: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} of sample {index} (state {state})")))
    }
}

/// Cross-entropy of the critic against two-hot λ-return targets, plus the
/// EMA-critic regularizer. The EMA distribution is a constant target.
pub fn critic_loss(
    net: &Mlp,
    bins: &Bins,
    params: &ParamVector,
    ema_params: &ParamVector,
    samples: &[LossSample],
    cfg: &CriticLossConfig,
) -> Result<LossGrad> {
    let mut pass = StatePass::run(net, params, samples.iter().map(|s| s.state))?;
    let loss = critic_terms(net, &mut pass, bins, ema_params, samples, cfg)?;
    let grad = pass.backward(net, params)?;
    Ok(LossGrad { loss, grad })
}

/// Adds the critic loss of `samples` to `pass` and returns its value.
pub(crate) fn critic_terms(
    net: &Mlp,
    pass: &mut StatePass,
    bins: &Bins,
    ema_params: &ParamVector,
    samples: &[LossSample],
    cfg: &CriticLossConfig,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("critic loss on an empty batch"));
    }
    if net.spec().output_dim != bins.len() {
        return Err(Error::Shape {
            context: "critic output vs bins",
            expected: bins.len(),
            actual: net.spec().output_dim,
        });
    }
    let ema_pass = if cfg.ema_regularizer != 0.0 {
        Some(StatePass::run(net, ema_params, samples.iter().map(|s| s.state))?)
    } else {
        None
    };
    let inv_n = 1.0 / samples.len() as f64;
    let mut loss = 0.0;
    for (i, s) in samples.iter().enumerate() {
        check_target(s.target, i, s.state, "critic target")?;
        let y = two_hot_encode(s.target, bins);
        let p = pass.probs(s.state).to_vec();
        let logp = log_softmax(pass.logits(s.state));
        loss += cross_entropy(&y, &logp) * inv_n;
        let d: Vec<f64> = p.iter().zip(&y).map(|(p, y)| p - y).collect();
        pass.accumulate(s.state, &d, inv_n);
        if let Some(ema) = &ema_pass {
            let q = ema.probs(s.state);
            loss += cfg.ema_regularizer * cross_entropy(q, &logp) * inv_n;
            let d: Vec<f64> = p.iter().zip(q).map(|(p, q)| p - q).collect();
            pass.accumulate(s.state, &d, cfg.ema_regularizer * inv_n);
        }
    }
    Ok(loss)
}

/// Reinforce with a value baseline: mean of `−ln π(a|s) · (target − value) / S`.
/// The advantage is a constant; only the log-probability is differentiated.
pub fn actor_loss_reinforce(
    net: &Mlp,
    params: &ParamVector,
    samples: &[LossSample],
    scale: &ScaleStats,
) -> Result<ActorLoss> {
    let mut pass = StatePass::run(net, params, samples.iter().map(|s| s.state))?;
    let stats = reinforce_terms(&mut pass, samples, scale.value, false)?;
    let grad = pass.backward(net, params)?;
    Ok(ActorLoss {
        loss: stats.loss,
        grad,
        mean_abs: stats.mean_abs,
        clamped: stats.clamped,
    })
}

/// [`actor_loss_reinforce`] with every term divided by the batch mean of
/// |term|, held constant: the base term of the guided actor loss.
pub fn actor_loss_normalized(
    net: &Mlp,
    params: &ParamVector,
    samples: &[LossSample],
    scale: &ScaleStats,
) -> Result<ActorLoss> {
    let mut pass = StatePass::run(net, params, samples.iter().map(|s| s.state))?;
    let stats = reinforce_terms(&mut pass, samples, scale.value, true)?;
    let grad = pass.backward(net, params)?;
    Ok(ActorLoss {
        loss: stats.loss,
        grad,
        mean_abs: stats.mean_abs,
        clamped: stats.clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ReinforceStats {
    pub loss: f64,
    pub mean_abs: f64,
    pub clamped: usize,
}

/// Adds the Reinforce loss of `samples` to `pass`. With `normalize`, every
/// term is divided by the batch mean of |term|, held constant.
pub(crate) fn reinforce_terms(
    pass: &mut StatePass,
    samples: &[LossSample],
    scale: f64,
    normalize: bool,
) -> Result<ReinforceStats> {
    if samples.is_empty() {
        return Err(Error::invalid("actor loss on an empty batch"));
    }
    let inv_n = 1.0 / samples.len() as f64;
    let log_floor = LOG_PROB_FLOOR.ln();
    let mut clamped = 0;
    let mut terms = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        check_target(s.target, i, s.state, "actor target")?;
        let lp = log_softmax(pass.logits(s.state))[s.action];
        let weight = (s.target - s.value) / scale;
        let live = lp >= log_floor;
        if !live {
            clamped += 1;
        }
        terms.push((-lp.max(log_floor) * weight, weight, live));
    }
    let mean_abs = terms.iter().map(|t| t.0.abs()).sum::<f64>() * inv_n;
    let normalizer = if normalize && mean_abs > 0.0 { mean_abs } else { 1.0 };
    let mut loss = 0.0;
    for (s, &(term, weight, live)) in samples.iter().zip(&terms) {
        loss += term / normalizer * inv_n;
        if live && weight != 0.0 {
            // d(−ln π_a)/dz = π − e_a
            let mut d = pass.probs(s.state).to_vec();
            d[s.action] -= 1.0;
            pass.accumulate(s.state, &d, weight / normalizer * inv_n);
        }
    }
    Ok(ReinforceStats {
        loss,
        mean_abs,
        clamped,
    })
}
