//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use guided_rl::actor_critic::LossSample;
use guided_rl::approx::{Activation, Bins, Mlp, MlpSpec, ParamVector};
use guided_rl::guide::GuideTarget;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// A 2-input, 8-hidden, `k`-output tanh network.
pub fn small_net(k: usize) -> Mlp {
    Mlp::new(MlpSpec {
        input_dim: 2,
        hidden_dim: 8,
        output_dim: k,
        num_hidden_layers: 1,
        activation: Activation::Tanh,
    })
    .unwrap()
}

pub fn random_params(net: &Mlp, seed: u64) -> ParamVector {
    let mut p = net.init(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5);
    for v in &mut p.values {
        *v += rng.random_range(-0.3..0.3);
    }
    p
}

/// Central differences of `f` around `params`.
pub fn numeric_grad(params: &ParamVector, h: f64, f: impl Fn(&ParamVector) -> f64) -> Vec<f64> {
    let mut work = params.clone();
    (0..params.len())
        .map(|i| {
            let x = params.values[i];
            work.values[i] = x + h;
            let up = f(&work);
            work.values[i] = x - h;
            let down = f(&work);
            work.values[i] = x;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest per-component relative error, with denominators floored at 1e-6.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Batch over the two states of a tiny MDP with `k` actions. Odd samples
/// carry a guide policy (some with a zero entry), every third a guide value.
pub fn two_state_batch(k: usize, seed: u64) -> Vec<LossSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..12)
        .map(|i| {
            let guide = (i % 2 == 1).then(|| {
                let mut policy: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
                if i % 4 == 1 {
                    policy[0] = 0.0;
                }
                let total: f64 = policy.iter().sum();
                GuideTarget {
                    policy: policy.into_iter().map(|p| p / total).collect(),
                    value_target: (i % 3 == 0).then(|| rng.random_range(-1.5..1.5)),
                }
            });
            LossSample {
                state: i % 2,
                action: rng.random_range(0..k),
                target: rng.random_range(-1.5..1.5),
                value: rng.random_range(-1.0..1.0),
                guide,
            }
        })
        .collect()
}

pub fn small_bins() -> Bins {
    Bins::linear(7, -2.0, 2.0).unwrap()
}

/// Finite-difference check of every loss on the two-state batch. Returns
/// `(loss name, max relative error)` pairs.
pub fn gradient_errors() -> Vec<(String, f64)> {
    use guided_rl::actor_critic::{
        actor_loss_normalized, actor_loss_reinforce, critic_loss, CriticLossConfig, ScaleStats,
    };
    use guided_rl::guide::{bc_loss, guided_actor_loss, guided_critic_loss, GuideConfig, GuideKind, KlDirection};

    let mut out = Vec::new();
    let k = 3;
    let samples = two_state_batch(k, 11);
    let scale = ScaleStats {
        value: 1.7,
        ema_decay: 0.99,
    };

    let bins = small_bins();
    let critic = small_net(bins.len());
    let cp = random_params(&critic, 1);
    let ema = random_params(&critic, 2);
    let ccfg = CriticLossConfig::default();
    let g = critic_loss(&critic, &bins, &cp, &ema, &samples, &ccfg).unwrap();
    let n = numeric_grad(&cp, FD_STEP, |p| {
        critic_loss(&critic, &bins, p, &ema, &samples, &ccfg).unwrap().loss
    });
    out.push(("critic".into(), max_rel_err(&g.grad, &n)));
    let g = guided_critic_loss(&critic, &bins, &cp, &ema, &samples, &ccfg, 0.3).unwrap();
    let n = numeric_grad(&cp, FD_STEP, |p| {
        guided_critic_loss(&critic, &bins, p, &ema, &samples, &ccfg, 0.3)
            .unwrap()
            .loss
    });
    out.push(("guided critic".into(), max_rel_err(&g.grad, &n)));

    let actor = small_net(k);
    let ap = random_params(&actor, 3);
    let g = actor_loss_reinforce(&actor, &ap, &samples, &scale).unwrap();
    let n = numeric_grad(&ap, FD_STEP, |p| {
        actor_loss_reinforce(&actor, p, &samples, &scale).unwrap().loss
    });
    out.push(("actor".into(), max_rel_err(&g.grad, &n)));
    // The normalizer is a constant, so the reference divides by its value at `ap`.
    let m0 = g.mean_abs;
    let g = actor_loss_normalized(&actor, &ap, &samples, &scale).unwrap();
    let n = numeric_grad(&ap, FD_STEP, |p| {
        actor_loss_reinforce(&actor, p, &samples, &scale).unwrap().loss / m0
    });
    out.push(("normalized actor".into(), max_rel_err(&g.grad, &n)));
    for kl in [KlDirection::Reverse, KlDirection::Forward] {
        let cfg = GuideConfig {
            kl,
            ..GuideConfig::new(GuideKind::AlphaZero)
        };
        let g = guided_actor_loss(&actor, &ap, &samples, scale.value, 1.3, &cfg).unwrap();
        let n = numeric_grad(&ap, FD_STEP, |p| {
            let base = actor_loss_reinforce(&actor, p, &samples, &scale).unwrap().loss / m0;
            base + guided_actor_loss(&actor, p, &samples, scale.value, 1.3, &cfg)
                .unwrap()
                .penalty
        });
        out.push((format!("guided actor ({})", kl.name()), max_rel_err(&g.grad, &n)));
    }

    let pairs: Vec<(usize, usize)> = samples.iter().map(|s| (s.state, s.action)).collect();
    let g = bc_loss(&actor, &ap, &pairs).unwrap();
    let n = numeric_grad(&ap, FD_STEP, |p| bc_loss(&actor, p, &pairs).unwrap().loss);
    out.push(("behavior cloning".into(), max_rel_err(&g.grad, &n)));
    out
}

/// Root states where budget-`budget` search with uniform priors and no root
/// noise picks a value-iteration optimal action, out of all non-terminal states.
pub fn search_agreement(mdp: &guided_rl::env::MdpSpec, budget: usize) -> (usize, usize) {
    use guided_rl::env::planning::optimal_actions;
    use guided_rl::env::value_iteration;
    use guided_rl::mcts::{run_search, SearchConfig, UniformOracle};

    let solution = value_iteration(mdp, 1e-12).unwrap();
    let cfg = SearchConfig {
        budget,
        dirichlet_mix: 0.0,
        ..SearchConfig::default()
    };
    let mut oracle = UniformOracle {
        num_actions: mdp.num_actions(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut agree, mut total) = (0, 0);
    for s in (0..mdp.num_states()).filter(|s| !mdp.is_terminal(*s)) {
        let out = run_search(mdp, s, &mut oracle, &cfg, &mut rng).unwrap();
        let best = out
            .pi_az
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(a, _)| a)
            .unwrap();
        total += 1;
        if optimal_actions(mdp, &solution.values, s, 1e-9).contains(&best) {
            agree += 1;
        }
    }
    (agree, total)
}

/// Fraction of 500 regenerated two-environment datasets (five seeds each,
/// scores N(0.3, 0.1) and N(0.7, 0.1)) whose 95% stratified bootstrap IQM
/// interval covers the population IQM of 0.5, which holds by symmetry.
pub fn bootstrap_coverage() -> f64 {
    use guided_rl::harness::{iqm, stratified_bootstrap_ci};
    use rand_distr::{Distribution, Normal};

    let envs = [Normal::new(0.3, 0.1).unwrap(), Normal::new(0.7, 0.1).unwrap()];
    let mut data_rng = ChaCha8Rng::seed_from_u64(2024);
    let mut boot_rng = ChaCha8Rng::seed_from_u64(99);
    let trials = 500;
    let mut covered = 0;
    for _ in 0..trials {
        let per_env: Vec<Vec<f64>> = envs
            .iter()
            .map(|d| (0..5).map(|_| d.sample(&mut data_rng)).collect())
            .collect();
        let (lo, hi) = stratified_bootstrap_ci(&per_env, iqm, 2000, 0.95, &mut boot_rng).unwrap();
        if lo <= 0.5 && 0.5 <= hi {
            covered += 1;
        }
    }
    covered as f64 / trials as f64
}
