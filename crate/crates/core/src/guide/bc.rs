use crate::actor_critic::{LossGrad, LOG_PROB_FLOOR};
use crate::approx::{log_softmax, Mlp, OptimizerState, ParamVector, StatePass};
use crate::env::ReplayBuffer;
use crate::error::{Error, Result};

/// Negative mean log-likelihood of the `(state, action)` pairs.
pub fn bc_loss(net: &Mlp, params: &ParamVector, pairs: &[(usize, usize)]) -> Result<LossGrad> {
    if pairs.is_empty() {
        return Err(Error::invalid("behavior cloning on an empty dataset"));
    }
    let mut pass = StatePass::run(net, params, pairs.iter().map(|p| p.0))?;
    let inv_n = 1.0 / pairs.len() as f64;
    let log_floor = LOG_PROB_FLOOR.ln();
    let mut loss = 0.0;
    for &(s, a) in pairs {
        let lp = log_softmax(pass.logits(s))[a];
        loss -= lp.max(log_floor) * inv_n;
        if lp >= log_floor {
            let mut d = pass.probs(s).to_vec();
            d[a] -= 1.0;
            pass.accumulate(s, &d, inv_n);
        }
    }
    let grad = pass.backward(net, params)?;
    Ok(LossGrad { loss, grad })
}

/// Full-batch gradient steps on [`bc_loss`]; returns the loss before each step.
pub fn bc_fit(
    net: &Mlp,
    params: &mut ParamVector,
    opt: &mut OptimizerState,
    pairs: &[(usize, usize)],
    steps: usize,
) -> Result<Vec<f64>> {
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let LossGrad { loss, grad } = bc_loss(net, params, pairs)?;
        opt.step(params, &grad)?;
        losses.push(loss);
    }
    Ok(losses)
}

/// Fits the policy to every buffered `(state, action)` pair, one full-batch
/// step per epoch.
pub fn bc_train(
    buffer: &ReplayBuffer,
    net: &Mlp,
    params: &mut ParamVector,
    opt: &mut OptimizerState,
    epochs: usize,
) -> Result<Vec<f64>> {
    if buffer.is_empty() {
        return Err(Error::NotReady("behavior cloning needs buffered transitions".into()));
    }
    let pairs: Vec<(usize, usize)> = buffer.transitions().map(|t| (t.state, t.action)).collect();
    bc_fit(net, params, opt, &pairs, epochs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{policy_forward, Activation, AdamConfig, MlpSpec};
    use crate::env::{one_hot, Transition};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(states: usize, actions: usize) -> Mlp {
        Mlp::new(MlpSpec {
            input_dim: states,
            hidden_dim: 8,
            output_dim: actions,
            num_hidden_layers: 1,
            activation: Activation::Tanh,
        })
        .unwrap()
    }

    fn adam(lr: f64) -> AdamConfig {
        AdamConfig {
            learning_rate: lr,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn clones_a_deterministic_policy() {
        let demo = [2usize, 0, 1];
        let mut buffer = ReplayBuffer::new(100).unwrap();
        let episode = (0..30)
            .map(|i| {
                let s = i % 3;
                Transition {
                    state: s,
                    action: demo[s],
                    reward: 0.0,
                    next_state: (s + 1) % 3,
                    continues: true,
                    guide: None,
                }
            })
            .collect();
        buffer.append(episode).unwrap();
        let net = net(3, 3);
        let mut params = net.init(&mut ChaCha8Rng::seed_from_u64(0));
        let mut opt = OptimizerState::new(adam(1e-2), params.len());
        bc_train(&buffer, &net, &mut params, &mut opt, 400).unwrap();
        for s in 0..3 {
            let p = policy_forward(&net, &params, &one_hot(s, 3)).unwrap().probs;
            assert!(p[demo[s]] > 0.99, "state {s}: {p:?}");
        }
    }

    #[test]
    fn single_pair_loss_goes_to_zero() {
        let net = net(1, 1);
        let mut params = net.init(&mut ChaCha8Rng::seed_from_u64(1));
        let mut opt = OptimizerState::new(adam(1e-2), params.len());
        let losses = bc_fit(&net, &mut params, &mut opt, &[(0, 0)], 3).unwrap();
        assert!(losses.iter().all(|l| l.abs() < 1e-12));
    }

    #[test]
    fn loss_non_increasing_with_small_steps() {
        for seed in 0..5 {
            let net = net(3, 4);
            let mut params = net.init(&mut ChaCha8Rng::seed_from_u64(seed));
            let mut opt = OptimizerState::new(adam(1e-4), params.len());
            let pairs = [(0, 1), (0, 1), (0, 3), (1, 2), (2, 0), (2, 0)];
            let losses = bc_fit(&net, &mut params, &mut opt, &pairs, 200).unwrap();
            for w in losses.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn empty_buffer_is_an_error() {
        let net = net(2, 2);
        let mut params = net.zeros();
        let mut opt = OptimizerState::new(AdamConfig::default(), params.len());
        let buffer = ReplayBuffer::new(10).unwrap();
        assert!(bc_train(&buffer, &net, &mut params, &mut opt, 1).is_err());
    }
}
