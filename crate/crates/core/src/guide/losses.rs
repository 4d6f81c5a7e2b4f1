use super::{GuideConfig, KlDirection};
use crate::actor_critic::{
    critic_terms, cross_entropy, lambda_return_at, reinforce_terms, CriticLossConfig, LambdaReturnConfig, LossGrad,
    LossSample, ScaleStats,
};
use crate::approx::{log_softmax, two_hot_encode, Bins, Mlp, ParamVector, StatePass};
use crate::error::{Error, Result};

/// Guide probabilities are floored here under reverse KL.
pub const GUIDE_PROB_FLOOR: f64 = 1e-8;

/// `λ_a · clip(exp(τ (v_e − v_θ) / S_E), 1, max_lambda)`.
pub fn adaptive_weight(
    v_target_e: f64,
    v_target_theta: f64,
    scale_e: f64,
    lambda_a: f64,
    tau: f64,
    max_lambda: f64,
) -> f64 {
    let ratio = (tau * (v_target_e - v_target_theta) / scale_e).exp();
    // NaN gaps fall back to the lower clip.
    let ratio = if ratio.is_nan() {
        1.0
    } else {
        ratio.clamp(1.0, max_lambda)
    };
    lambda_a * ratio
}

/// KL(p ‖ q) with the `0 log 0 = 0` convention.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * (p.ln() - q.ln()))
        .sum()
}

/// Floors every entry at [`GUIDE_PROB_FLOOR`] and renormalizes. The flag
/// reports whether anything was raised.
pub fn floor_simplex(q: &[f64]) -> (Vec<f64>, bool) {
    if q.iter().all(|x| *x >= GUIDE_PROB_FLOOR) {
        return (q.to_vec(), false);
    }
    let raised: Vec<f64> = q.iter().map(|x| x.max(GUIDE_PROB_FLOOR)).collect();
    let total: f64 = raised.iter().sum();
    (raised.into_iter().map(|x| x / total).collect(), true)
}

pub fn guide_scale_update(stats: &mut ScaleStats, guide_values: &[f64]) -> Result<f64> {
    stats.update(guide_values)
}

/// λ-returns whose bootstraps use the guide's value wherever one was
/// recorded and the agent's own value elsewhere. Positions without a guide
/// value get `None`.
pub fn guide_lambda_returns(
    rewards: &[f64],
    continues: &[bool],
    own_values: &[f64],
    guide_values: &[Option<f64>],
    cfg: &LambdaReturnConfig,
) -> Result<Vec<Option<f64>>> {
    let len = rewards.len();
    if continues.len() != len || own_values.len() != len + 1 || guide_values.len() > len + 1 {
        return Err(Error::Shape {
            context: "guide_lambda_returns values (rewards + 1)",
            expected: len + 1,
            actual: own_values.len(),
        });
    }
    let values: Vec<f64> = own_values
        .iter()
        .enumerate()
        .map(|(i, v)| guide_values.get(i).copied().flatten().unwrap_or(*v))
        .collect();
    Ok((0..len)
        .map(|t| {
            guide_values[t].map(|_| lambda_return_at(rewards, continues, &values, t, cfg.horizon.min(len - t), cfg))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidedActorLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Mean |term| of the un-normalized base loss.
    pub mean_abs: f64,
    /// Samples whose action log-probability was clamped.
    pub clamped: usize,
    /// Guide simplices raised to the probability floor.
    pub floored: usize,
    /// Batch mean of the weighted KL penalty.
    pub penalty: f64,
    /// Mean adaptive weight over guided samples.
    pub mean_weight: f64,
}

/// Base Reinforce loss normalized by its batch mean |term|, plus an
/// adaptively weighted KL penalty toward the guide on guided samples.
pub fn guided_actor_loss(
    net: &Mlp,
    params: &ParamVector,
    samples: &[LossSample],
    base_scale: f64,
    guide_scale: f64,
    cfg: &GuideConfig,
) -> Result<GuidedActorLoss> {
    let mut pass = StatePass::run(net, params, samples.iter().map(|s| s.state))?;
    let base = reinforce_terms(&mut pass, samples, base_scale, true)?;
    let inv_n = 1.0 / samples.len() as f64;
    let (mut penalty, mut floored, mut weight_sum, mut guided) = (0.0, 0, 0.0, 0usize);
    if cfg.lambda_actor != 0.0 {
        for (i, s) in samples.iter().enumerate() {
            let Some(g) = &s.guide else { continue };
            let a = pass.probs(s.state).len();
            if g.policy.len() != a {
                return Err(Error::Shape {
                    context: "guide policy",
                    expected: a,
                    actual: g.policy.len(),
                });
            }
            if g.policy.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "guide policy of sample {i} (state {})",
                    s.state
                )));
            }
            let weight = match g.value_target {
                Some(ve) => adaptive_weight(ve, s.target, guide_scale, cfg.lambda_actor, cfg.tau, cfg.max_lambda),
                None => cfg.lambda_actor,
            };
            weight_sum += weight;
            guided += 1;
            let p = pass.probs(s.state).to_vec();
            let (kl, d) = match cfg.kl {
                KlDirection::Reverse => {
                    let (q, raised) = floor_simplex(&g.policy);
                    floored += usize::from(raised);
                    let logp = log_softmax(pass.logits(s.state));
                    let kl: f64 = p.iter().zip(&logp).zip(&q).map(|((p, lp), q)| p * (lp - q.ln())).sum();
                    // dKL/dz_j = p_j (log p_j − log q_j − KL)
                    let d: Vec<f64> = p
                        .iter()
                        .zip(&logp)
                        .zip(&q)
                        .map(|((p, lp), q)| p * (lp - q.ln() - kl))
                        .collect();
                    (kl, d)
                }
                KlDirection::Forward => {
                    let logp = log_softmax(pass.logits(s.state));
                    let q = &g.policy;
                    let kl: f64 = q
                        .iter()
                        .zip(&logp)
                        .filter(|(q, _)| **q > 0.0)
                        .map(|(q, lp)| q * (q.ln() - lp))
                        .sum();
                    let d: Vec<f64> = p.iter().zip(q).map(|(p, q)| p - q).collect();
                    (kl, d)
                }
            };
            penalty += weight * kl * inv_n;
            pass.accumulate(s.state, &d, weight * inv_n);
        }
    }
    let grad = pass.backward(net, params)?;
    Ok(GuidedActorLoss {
        loss: base.loss + penalty,
        grad,
        mean_abs: base.mean_abs,
        clamped: base.clamped,
        floored,
        penalty,
        mean_weight: if guided > 0 { weight_sum / guided as f64 } else { 0.0 },
    })
}

/// Base critic loss plus `λ_c` times the mean cross-entropy toward the
/// two-hot guide value target over samples that carry one.
pub fn guided_critic_loss(
    net: &Mlp,
    bins: &Bins,
    params: &ParamVector,
    ema_params: &ParamVector,
    samples: &[LossSample],
    critic_cfg: &CriticLossConfig,
    lambda_critic: f64,
) -> Result<LossGrad> {
    let mut pass = StatePass::run(net, params, samples.iter().map(|s| s.state))?;
    let mut loss = critic_terms(net, &mut pass, bins, ema_params, samples, critic_cfg)?;
    if lambda_critic != 0.0 {
        let targets: Vec<(usize, f64)> = samples
            .iter()
            .filter_map(|s| s.guide.as_ref().and_then(|g| g.value_target).map(|v| (s.state, v)))
            .collect();
        if !targets.is_empty() {
            let w = lambda_critic / targets.len() as f64;
            for (i, &(state, v)) in targets.iter().enumerate() {
                crate::actor_critic::check_target(v, i, state, "guide critic target")?;
                let y = two_hot_encode(v, bins);
                let logp = log_softmax(pass.logits(state));
                loss += w * cross_entropy(&y, &logp);
                let d: Vec<f64> = pass.probs(state).iter().zip(&y).map(|(p, y)| p - y).collect();
                pass.accumulate(state, &d, w);
            }
        }
    }
    let grad = pass.backward(net, params)?;
    Ok(LossGrad { loss, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actor_critic::{actor_loss_reinforce, critic_loss};
    use crate::approx::{softmax, Activation, MlpSpec};
    use crate::guide::{GuideKind, GuideTarget};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn net(states: usize, out: usize) -> Mlp {
        Mlp::new(MlpSpec {
            input_dim: states,
            hidden_dim: 8,
            output_dim: out,
            num_hidden_layers: 1,
            activation: Activation::Tanh,
        })
        .unwrap()
    }

    fn random_params(net: &Mlp, rng: &mut ChaCha8Rng) -> ParamVector {
        let mut p = net.zeros();
        p.values.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        p
    }

    fn batch(rng: &mut ChaCha8Rng, states: usize, actions: usize, n: usize) -> Vec<LossSample> {
        (0..n)
            .map(|i| LossSample {
                state: rng.random_range(0..states),
                action: rng.random_range(0..actions),
                target: rng.random_range(-1.0..1.0),
                value: rng.random_range(-1.0..1.0),
                guide: (i % 2 == 0).then(|| {
                    let raw: Vec<f64> = (0..actions).map(|_| rng.random_range(-2.0..2.0)).collect();
                    GuideTarget {
                        policy: softmax(&raw),
                        value_target: rng.random_bool(0.5).then(|| rng.random_range(-1.0..1.0)),
                    }
                }),
            })
            .collect()
    }

    #[test]
    fn weight_examples() {
        assert_eq!(adaptive_weight(0.3, 0.3, 2.0, 0.7, 5.0, 10.0), 0.7);
        assert_eq!(adaptive_weight(1e6, 0.0, 1.0, 0.7, 5.0, 10.0), 7.0);
        assert_eq!(adaptive_weight(-3.0, 0.0, 1.0, 0.7, 5.0, 10.0), 0.7);
    }

    #[test]
    fn identical_policies_have_no_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let policy = net(2, 3);
        let params = random_params(&policy, &mut rng);
        let mut samples = batch(&mut rng, 2, 3, 6);
        for s in &mut samples {
            let logits = policy
                .forward(&params, &crate::env::one_hot(s.state, 2))
                .unwrap()
                .logits;
            if let Some(g) = &mut s.guide {
                g.policy = softmax(&logits);
            }
        }
        for kl in [KlDirection::Reverse, KlDirection::Forward] {
            let cfg = GuideConfig {
                kl,
                ..GuideConfig::new(GuideKind::AlphaZero)
            };
            let out = guided_actor_loss(&policy, &params, &samples, 1.0, 1.0, &cfg).unwrap();
            assert!(out.penalty.abs() < 1e-15, "{kl:?}: {}", out.penalty);
        }
    }

    #[test]
    fn zero_weights_reduce_to_base() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (policy, critic) = (net(2, 3), net(2, 5));
        let bins = Bins::linear(5, -1.0, 1.0).unwrap();
        let pp = random_params(&policy, &mut rng);
        let cp = random_params(&critic, &mut rng);
        let ema = random_params(&critic, &mut rng);
        let samples = batch(&mut rng, 2, 3, 10);
        let cfg = GuideConfig {
            lambda_actor: 0.0,
            lambda_critic: 0.0,
            ..GuideConfig::new(GuideKind::AlphaZero)
        };
        let scale = ScaleStats {
            value: 1.7,
            ema_decay: 0.9,
        };
        let base = actor_loss_reinforce(&policy, &pp, &samples, &scale).unwrap();
        let guided = guided_actor_loss(&policy, &pp, &samples, 1.7, 1.0, &cfg).unwrap();
        assert!((guided.loss - base.loss / base.mean_abs).abs() < 1e-12);
        for (g, b) in guided.grad.iter().zip(&base.grad) {
            assert!((g - b / base.mean_abs).abs() < 1e-12);
        }
        let cc = CriticLossConfig::default();
        let a = critic_loss(&critic, &bins, &cp, &ema, &samples, &cc).unwrap();
        let b = guided_critic_loss(&critic, &bins, &cp, &ema, &samples, &cc, 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reverse_kl_to_uniform_is_negative_entropy_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let k = rng.random_range(2..7);
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p = softmax(&raw);
            let h: f64 = -p.iter().map(|x| x * x.ln()).sum::<f64>();
            let kl = kl_divergence(&p, &vec![1.0 / k as f64; k]);
            assert!((kl - ((k as f64).ln() - h)).abs() < 1e-12);
        }
    }

    #[test]
    fn floor_counts_zeros() {
        let (q, raised) = floor_simplex(&[0.0, 0.5, 0.5]);
        assert!(raised);
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(q[0] > 0.0);
        assert!(!floor_simplex(&[0.5, 0.5]).1);
    }

    #[test]
    fn guide_critic_penalty_on_own_target_matches_base_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let critic = net(2, 5);
        let bins = Bins::linear(5, -1.0, 1.0).unwrap();
        let cp = random_params(&critic, &mut rng);
        let mut samples = batch(&mut rng, 2, 3, 8);
        for s in &mut samples {
            s.guide = Some(GuideTarget {
                policy: vec![1.0 / 3.0; 3],
                value_target: Some(s.target),
            });
        }
        let cc = CriticLossConfig { ema_regularizer: 0.0 };
        let base = critic_loss(&critic, &bins, &cp, &cp, &samples, &cc).unwrap();
        let guided = guided_critic_loss(&critic, &bins, &cp, &cp, &samples, &cc, 0.05).unwrap();
        assert!((guided.loss - 1.05 * base.loss).abs() < 1e-12);
        for (g, b) in guided.grad.iter().zip(&base.grad) {
            assert!((g - 1.05 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn guide_returns_use_guide_bootstraps() {
        let cfg = LambdaReturnConfig {
            lambda: 0.0,
            horizon: 5,
            gamma: 0.5,
        };
        let out = guide_lambda_returns(
            &[1.0, 1.0],
            &[true, true],
            &[0.0, 0.0, 0.0],
            &[Some(9.0), Some(4.0)],
            &cfg,
        )
        .unwrap();
        assert_eq!(out, vec![Some(3.0), Some(1.0)]);
        let partial =
            guide_lambda_returns(&[1.0, 1.0], &[true, true], &[0.0, 2.0, 0.0], &[None, Some(4.0)], &cfg).unwrap();
        assert_eq!(partial, vec![None, Some(1.0)]);
    }
}
