//! Seeded training and evaluation loops.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::metrics::normalized_score;
use crate::actor_critic::{
    actor_loss_reinforce, critic_loss, lambda_returns, CriticLossConfig, LossSample, ScaleStats,
};
use crate::approx::{
    ema_update, expected_value, policy_forward, Bins, Checkpoint, Mlp, MlpSpec, OptimizerState, ParamVector, StatePass,
};
use crate::env::planning::{deterministic_policy, finite_horizon_value};
use crate::env::{sample_categorical, value_iteration, MdpSpec, ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::guide::{guide_lambda_returns, guided_actor_loss, guided_critic_loss, AgentView, Guide, GuideTarget};

/// Episodes of the uniform-random reference rollout.
pub const RANDOM_REF_EPISODES: usize = 10_000;
const RANDOM_REF_SEED: u64 = 0x005e_ed0f_7a2d;

/// Score references of one environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct References {
    /// Mean undiscounted return of the uniform-random policy.
    pub random: f64,
    /// Expected undiscounted return of the value-iteration greedy policy.
    pub expert: f64,
}

pub fn references(mdp: &MdpSpec) -> Result<References> {
    let solution = value_iteration(mdp, 1e-10)?;
    let greedy = deterministic_policy(mdp.num_actions(), &solution.policy);
    let per_state = finite_horizon_value(mdp, &greedy, mdp.time_limit(), 1.0)?;
    let expert = mdp
        .initial_distribution()
        .iter()
        .zip(&per_state)
        .map(|(p, v)| p * v)
        .sum();
    let uniform = vec![vec![1.0 / mdp.num_actions() as f64; mdp.num_actions()]; mdp.num_states()];
    let mut rng = ChaCha8Rng::seed_from_u64(RANDOM_REF_SEED);
    let scores = rollout_returns(mdp, &uniform, RANDOM_REF_EPISODES, &mut rng)?;
    let random = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(References { random, expert })
}

/// Undiscounted episode returns of a tabular stochastic policy, truncated
/// at the environment's time limit.
pub fn rollout_returns<R: Rng + ?Sized>(
    mdp: &MdpSpec,
    policy: &[Vec<f64>],
    episodes: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if episodes == 0 {
        return Err(Error::invalid("evaluation needs at least one episode"));
    }
    let mut scores = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut state = mdp.reset(rng);
        let mut total = 0.0;
        for _ in 0..mdp.time_limit() {
            if mdp.is_terminal(state) {
                break;
            }
            let action = sample_categorical(&policy[state], rng);
            let out = mdp.step(state, action, rng)?;
            total += out.reward;
            state = out.next_state;
        }
        scores.push(total);
    }
    Ok(scores)
}

/// Action distribution of the actor at every state.
pub fn policy_table(policy: &Mlp, params: &ParamVector, mdp: &MdpSpec) -> Result<Vec<Vec<f64>>> {
    (0..mdp.num_states())
        .map(|s| Ok(policy_forward(policy, params, &mdp.observe(s))?.probs))
        .collect()
}

/// Per-episode undiscounted returns of the raw actor, sampling actions.
pub fn evaluate<R: Rng + ?Sized>(
    policy: &Mlp,
    params: &ParamVector,
    mdp: &MdpSpec,
    episodes: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if episodes == 0 {
        return Err(Error::invalid("evaluation needs at least one episode"));
    }
    rollout_returns(mdp, &policy_table(policy, params, mdp)?, episodes, rng)
}

/// Actor, distributional critic and their optimizer state.
#[derive(Debug, Clone)]
pub struct Agent {
    pub policy: Mlp,
    pub policy_params: ParamVector,
    pub critic: Mlp,
    pub critic_params: ParamVector,
    pub critic_ema: ParamVector,
    pub bins: Bins,
    pub scale: ScaleStats,
    pub guide_scale: ScaleStats,
    actor_opt: OptimizerState,
    critic_opt: OptimizerState,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub clamped: usize,
    pub floored: usize,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(cfg: &RunConfig, mdp: &MdpSpec, rng: &mut R) -> Result<Self> {
        let bins = cfg.bins()?;
        let spec = |out| MlpSpec {
            input_dim: mdp.num_states(),
            hidden_dim: cfg.hidden,
            output_dim: out,
            num_hidden_layers: cfg.layers,
            activation: cfg.activation,
        };
        let policy = Mlp::new(spec(mdp.num_actions()))?;
        let critic = Mlp::new(spec(bins.len()))?;
        let policy_params = policy.init(rng);
        let critic_params = critic.init(rng);
        let adam = cfg.adam();
        Ok(Self {
            actor_opt: OptimizerState::new(adam, policy_params.len()),
            critic_opt: OptimizerState::new(adam, critic_params.len()),
            critic_ema: critic_params.clone(),
            policy,
            policy_params,
            critic,
            critic_params,
            bins,
            scale: ScaleStats::new(cfg.scale_ema_decay),
            guide_scale: ScaleStats::new(cfg.guide_scale_ema_decay),
        })
    }

    pub fn action_probs(&self, mdp: &MdpSpec, state: usize) -> Result<Vec<f64>> {
        Ok(policy_forward(&self.policy, &self.policy_params, &mdp.observe(state))?.probs)
    }

    fn view<'a>(&'a self, mdp: &'a MdpSpec, progress: f64) -> AgentView<'a> {
        AgentView {
            mdp,
            policy: &self.policy,
            policy_params: &self.policy_params,
            critic: &self.critic,
            critic_params: &self.critic_params,
            bins: &self.bins,
            progress,
        }
    }

    /// Builds loss samples from replay windows: λ-return targets from the
    /// current critic and, where recorded, the guide's policy and value target.
    pub fn samples(&self, cfg: &RunConfig, windows: &[&[Transition]]) -> Result<Vec<LossSample>> {
        let mut states = BTreeSet::new();
        for w in windows {
            states.extend(w.iter().map(|t| t.state));
            if let Some(last) = w.last() {
                states.insert(last.next_state);
            }
        }
        let pass = StatePass::run(&self.critic, &self.critic_params, states.iter().copied())?;
        let value = |s: usize| expected_value(self.bins.values(), pass.probs(s));
        let returns = cfg.returns();
        let mut out = Vec::with_capacity(windows.len() * cfg.batch_length);
        for w in windows {
            let rewards: Vec<f64> = w.iter().map(|t| t.reward).collect();
            let continues: Vec<bool> = w.iter().map(|t| t.continues).collect();
            let mut values: Vec<f64> = w.iter().map(|t| value(t.state)).collect();
            values.push(value(w[w.len() - 1].next_state));
            let targets = lambda_returns(&rewards, &continues, &values, &returns)?;
            let guide_values: Vec<Option<f64>> =
                w.iter().map(|t| t.guide.as_ref().and_then(|g| g.v_target_e)).collect();
            let guide_targets = if guide_values.iter().any(Option::is_some) {
                guide_lambda_returns(&rewards, &continues, &values, &guide_values, &returns)?
            } else {
                vec![None; w.len()]
            };
            for (i, t) in w.iter().enumerate() {
                out.push(LossSample {
                    state: t.state,
                    action: t.action,
                    target: targets[i],
                    value: values[i],
                    guide: t.guide.as_ref().map(|g| GuideTarget {
                        policy: g.pi_e.clone(),
                        value_target: guide_targets[i],
                    }),
                });
            }
        }
        Ok(out)
    }

    /// One actor and critic gradient step on `samples`.
    pub fn update(&mut self, cfg: &RunConfig, samples: &[LossSample]) -> Result<UpdateStats> {
        let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
        let base_scale = self.scale;
        self.scale.update(&targets)?;
        let guide_cfg = cfg.guide();
        let guide_scale = self.guide_scale.value;
        let guide_values: Vec<f64> = samples
            .iter()
            .filter_map(|s| s.guide.as_ref().and_then(|g| g.value_target))
            .collect();
        if !guide_values.is_empty() {
            self.guide_scale.update(&guide_values)?;
        }

        let critic_cfg = CriticLossConfig {
            ema_regularizer: cfg.critic_ema_reg,
        };
        let critic = match &guide_cfg {
            Some(g) => guided_critic_loss(
                &self.critic,
                &self.bins,
                &self.critic_params,
                &self.critic_ema,
                samples,
                &critic_cfg,
                g.lambda_critic,
            )?,
            None => critic_loss(
                &self.critic,
                &self.bins,
                &self.critic_params,
                &self.critic_ema,
                samples,
                &critic_cfg,
            )?,
        };
        let (actor_loss, actor_grad, clamped, floored) = match &guide_cfg {
            Some(g) => {
                let out = guided_actor_loss(
                    &self.policy,
                    &self.policy_params,
                    samples,
                    base_scale.value,
                    guide_scale,
                    g,
                )?;
                (out.loss, out.grad, out.clamped, out.floored)
            }
            None => {
                let out = actor_loss_reinforce(&self.policy, &self.policy_params, samples, &base_scale)?;
                (out.loss, out.grad, out.clamped, 0)
            }
        };
        if !critic.loss.is_finite() || !actor_loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "training loss (actor {actor_loss}, critic {})",
                critic.loss
            )));
        }
        self.critic_opt.step(&mut self.critic_params, &critic.grad)?;
        ema_update(&mut self.critic_ema, &self.critic_params, cfg.critic_ema_decay)?;
        self.actor_opt.step(&mut self.policy_params, &actor_grad)?;
        Ok(UpdateStats {
            actor_loss,
            critic_loss: critic.loss,
            clamped,
            floored,
        })
    }

    /// Actor checkpoint carrying the full run config as metadata.
    pub fn actor_checkpoint(&self, cfg: &RunConfig) -> Checkpoint {
        let mut meta: Vec<(String, String)> = cfg
            .entries()
            .into_iter()
            .map(|(k, v)| (format!("cfg.{k}"), v))
            .collect();
        meta.push(("net".into(), "actor".into()));
        Checkpoint {
            meta,
            params: self.policy_params.clone(),
        }
    }
}

/// One evaluation point of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub step: u64,
    pub seed: u64,
    pub raw_mean: f64,
    pub normalized: f64,
    pub guide_calls: u64,
    pub updates: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub env: String,
    pub seed: u64,
    pub references: References,
    pub rows: Vec<EvalRow>,
    /// Seconds since the start of the run at each row.
    pub wall_seconds: Vec<f64>,
    pub guide_calls: u64,
    pub updates: u64,
    pub env_steps: u64,
    pub episodes: u64,
    pub clamped: u64,
    pub floored: u64,
}

impl RunRecord {
    pub fn final_row(&self) -> &EvalRow {
        self.rows.last().expect("a run has at least the step-0 row")
    }

    pub fn total_seconds(&self) -> f64 {
        self.wall_seconds.last().copied().unwrap_or(0.0)
    }
}

pub struct TrainOutcome {
    pub record: RunRecord,
    pub agent: Agent,
    pub guide: Option<Guide>,
}

/// Streams derived from the run seed, one per consumer, so that adding a
/// guide does not shift the environment's random draws.
struct Streams {
    init: ChaCha8Rng,
    env: ChaCha8Rng,
    act: ChaCha8Rng,
    guide: ChaCha8Rng,
    sample: ChaCha8Rng,
    eval: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let mut next = || ChaCha8Rng::seed_from_u64(master.random());
        Self {
            init: next(),
            env: next(),
            act: next(),
            guide: next(),
            sample: next(),
            eval: next(),
        }
    }
}

pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    train_with_diagnostics(cfg, None)
}

/// Runs `cfg` for `cfg.seed`. On a non-finite loss the actor is written to
/// `diagnostic_dir/diagnostic.ckpt` before the error is returned.
pub fn train_with_diagnostics(cfg: &RunConfig, diagnostic_dir: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let env_spec = cfg.env_spec()?;
    let mdp = env_spec.build(cfg.gamma, cfg.time_limit)?;
    let refs = references(&mdp)?;
    let mut rng = Streams::new(cfg.seed);
    let mut agent = Agent::new(cfg, &mdp, &mut rng.init)?;
    let mut guide = match cfg.guide() {
        Some(g) => {
            let mut guide = Guide::new(g, cfg.search())?;
            guide.init_bc(agent.policy.init(&mut rng.init), cfg.adam());
            Some(guide)
        }
        None => None,
    };
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
    let eval_every = cfg.resolved_eval_every();
    let total = cfg.total_env_steps;

    let mut record = RunRecord {
        label: cfg.name.clone(),
        env: env_spec.label(),
        seed: cfg.seed,
        references: refs,
        rows: Vec::new(),
        wall_seconds: Vec::new(),
        guide_calls: 0,
        updates: 0,
        env_steps: 0,
        episodes: 0,
        clamped: 0,
        floored: 0,
    };
    let mut eval_row = |agent: &Agent, record: &mut RunRecord, guide: &Option<Guide>, step: u64| -> Result<()> {
        let scores = evaluate(
            &agent.policy,
            &agent.policy_params,
            &mdp,
            cfg.eval_episodes,
            &mut rng.eval,
        )?;
        let raw_mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let calls = guide.as_ref().map_or(0, Guide::calls);
        record.rows.push(EvalRow {
            step,
            seed: cfg.seed,
            raw_mean,
            normalized: normalized_score(raw_mean, refs.random, refs.expert)?,
            guide_calls: calls,
            updates: record.updates,
        });
        record.wall_seconds.push(start.elapsed().as_secs_f64());
        Ok(())
    };
    eval_row(&agent, &mut record, &guide, 0)?;

    let mut state = mdp.reset(&mut rng.env);
    let mut episode: Vec<Transition> = Vec::new();
    for step in 0..total {
        let progress = step as f64 / total as f64;
        let guide_out = match guide.as_mut() {
            Some(g) => g.guide_outputs(state, step, &agent.view(&mdp, progress), &mut rng.guide)?,
            None => None,
        };
        let probs = agent.action_probs(&mdp, state)?;
        let action = sample_categorical(&probs, &mut rng.act);
        let out = mdp.step(state, action, &mut rng.env)?;
        episode.push(Transition {
            state,
            action,
            reward: out.reward,
            next_state: out.next_state,
            continues: out.continues,
            guide: guide_out,
        });
        if !out.continues || episode.len() >= mdp.time_limit() {
            let finished = std::mem::take(&mut episode);
            if finished.len() <= buffer.capacity() {
                buffer.append(finished)?;
            }
            record.episodes += 1;
            state = mdp.reset(&mut rng.env);
        } else {
            state = out.next_state;
        }
        let done = step + 1;
        if done >= cfg.warmup && done % cfg.train_every == 0 && buffer.is_ready(cfg.batch_length) {
            let windows = buffer.sample_batch(cfg.batch_size, cfg.batch_length, &mut rng.sample)?;
            let samples = agent.samples(cfg, &windows)?;
            let stats = match agent.update(cfg, &samples) {
                Ok(stats) => stats,
                Err(e) => {
                    if let Some(dir) = diagnostic_dir {
                        let file = std::fs::File::create(dir.join("diagnostic.ckpt"))?;
                        agent.actor_checkpoint(cfg).write_to(std::io::BufWriter::new(file))?;
                    }
                    return Err(Error::NonFinite(format!("update at step {done}: {e}")));
                }
            };
            if let Some(g) = guide.as_mut() {
                let pairs: Vec<(usize, usize)> = samples.iter().map(|s| (s.state, s.action)).collect();
                g.bc_update(&agent.policy, &pairs, cfg.bc_steps)?;
            }
            record.updates += 1;
            record.clamped += stats.clamped as u64;
            record.floored += stats.floored as u64;
        }
        if done % eval_every == 0 || done == total {
            eval_row(&agent, &mut record, &guide, done)?;
        }
    }
    record.env_steps = total;
    record.guide_calls = guide.as_ref().map_or(0, Guide::calls);
    Ok(TrainOutcome { record, agent, guide })
}
