//! Guide policies and the guide-regularized actor and critic losses.

mod bc;
mod losses;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use bc::{bc_fit, bc_loss, bc_train};
pub use losses::{
    adaptive_weight, floor_simplex, guide_lambda_returns, guide_scale_update, guided_actor_loss, guided_critic_loss,
    kl_divergence, GuidedActorLoss, GUIDE_PROB_FLOOR,
};

use crate::approx::{policy_forward, AdamConfig, Bins, Mlp, OptimizerState, ParamVector};
use crate::env::MdpSpec;
use crate::error::{Error, Result};
use crate::mcts::{run_search, temperature_schedule, NetworkOracle, SearchConfig};

/// What a guide produced for one visited state.
#[derive(Debug, Clone, PartialEq)]
pub struct GuideOutput {
    pub pi_e: Vec<f64>,
    pub v_target_e: Option<f64>,
    pub produced_at_step: u64,
}

/// Guide information attached to a training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GuideTarget {
    pub policy: Vec<f64>,
    /// λ-return built from the guide's value estimates, when it has any.
    pub value_target: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuideKind {
    Random,
    BehaviorCloning,
    AlphaZero,
}

impl GuideKind {
    pub fn name(self) -> &'static str {
        match self {
            GuideKind::Random => "random",
            GuideKind::BehaviorCloning => "bc",
            GuideKind::AlphaZero => "alphazero",
        }
    }

    /// Default actor penalty weight λ_a.
    pub fn default_lambda_actor(self) -> f64 {
        match self {
            GuideKind::Random => 0.03,
            GuideKind::BehaviorCloning => 0.08,
            GuideKind::AlphaZero => 0.7,
        }
    }
}

impl fmt::Display for GuideKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GuideKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(GuideKind::Random),
            "bc" | "behavior_cloning" => Ok(GuideKind::BehaviorCloning),
            "alphazero" | "az" => Ok(GuideKind::AlphaZero),
            _ => Err(Error::invalid(format!("unknown guide kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// KL(π_θ ‖ π_E)
    Reverse,
    /// KL(π_E ‖ π_θ)
    Forward,
}

impl KlDirection {
    pub fn name(self) -> &'static str {
        match self {
            KlDirection::Reverse => "reverse",
            KlDirection::Forward => "forward",
        }
    }
}

impl FromStr for KlDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reverse" => Ok(KlDirection::Reverse),
            "forward" => Ok(KlDirection::Forward),
            _ => Err(Error::invalid(format!("unknown kl direction {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuideConfig {
    pub kind: GuideKind,
    pub lambda_actor: f64,
    pub lambda_critic: f64,
    pub tau: f64,
    pub max_lambda: f64,
    /// The guide runs on steps divisible by this.
    pub frequency: u64,
    pub kl: KlDirection,
    /// EMA decay of the guide return scale S_E.
    pub scale_ema_decay: f64,
}

impl GuideConfig {
    pub fn new(kind: GuideKind) -> Self {
        Self {
            kind,
            lambda_actor: kind.default_lambda_actor(),
            lambda_critic: 0.05,
            tau: 5.0,
            max_lambda: 10.0,
            frequency: 1,
            kl: KlDirection::Reverse,
            scale_ema_decay: 0.99,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_actor >= 0.0) || !(self.lambda_critic >= 0.0) {
            return Err(Error::invalid("guide penalty weights must be non-negative"));
        }
        if !(self.max_lambda >= 1.0) {
            return Err(Error::invalid("max_lambda must be at least 1"));
        }
        if !self.tau.is_finite() {
            return Err(Error::invalid("tau must be finite"));
        }
        if self.frequency == 0 {
            return Err(Error::invalid("guide frequency must be positive"));
        }
        if !(0.0..1.0).contains(&self.scale_ema_decay) {
            return Err(Error::invalid("guide scale_ema_decay must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Read-only view of the agent the guide may consult.
pub struct AgentView<'a> {
    pub mdp: &'a MdpSpec,
    pub policy: &'a Mlp,
    pub policy_params: &'a ParamVector,
    pub critic: &'a Mlp,
    pub critic_params: &'a ParamVector,
    pub bins: &'a Bins,
    /// Fraction of the training budget already spent.
    pub progress: f64,
}

/// A stateful guide: configuration, its own parameters (behavior cloning)
/// and a call counter.
#[derive(Debug, Clone)]
pub struct Guide {
    pub config: GuideConfig,
    pub search: SearchConfig,
    bc: Option<(ParamVector, OptimizerState)>,
    calls: u64,
}

impl Guide {
    pub fn new(config: GuideConfig, search: SearchConfig) -> Result<Self> {
        config.validate()?;
        if config.kind == GuideKind::AlphaZero {
            search.validate()?;
        }
        Ok(Self {
            config,
            search,
            bc: None,
            calls: 0,
        })
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn is_due(&self, step: u64) -> bool {
        step.is_multiple_of(self.config.frequency)
    }

    /// Sets up the behavior-cloning policy. Other kinds ignore this.
    pub fn init_bc(&mut self, params: ParamVector, adam: AdamConfig) {
        if self.config.kind == GuideKind::BehaviorCloning {
            let opt = OptimizerState::new(adam, params.len());
            self.bc = Some((params, opt));
        }
    }

    pub fn bc_params(&self) -> Option<&ParamVector> {
        self.bc.as_ref().map(|b| &b.0)
    }

    /// Refits the behavior-cloning policy on `(state, action)` pairs.
    pub fn bc_update(&mut self, net: &Mlp, pairs: &[(usize, usize)], steps: usize) -> Result<Option<f64>> {
        match &mut self.bc {
            Some((params, opt)) if !pairs.is_empty() => Ok(bc_fit(net, params, opt, pairs, steps)?.last().copied()),
            _ => Ok(None),
        }
    }

    /// Guide output for `state` at environment step `step`, or `None` when
    /// the guide is not scheduled on this step.
    pub fn guide_outputs<R: Rng + ?Sized>(
        &mut self,
        state: usize,
        step: u64,
        agent: &AgentView<'_>,
        rng: &mut R,
    ) -> Result<Option<GuideOutput>> {
        if !self.is_due(step) {
            return Ok(None);
        }
        if agent.mdp.is_terminal(state) {
            return Err(Error::invalid(format!("guide queried at terminal state {state}")));
        }
        let a = agent.mdp.num_actions();
        let (pi_e, v_target_e) = match self.config.kind {
            GuideKind::Random => (vec![1.0 / a as f64; a], None),
            GuideKind::BehaviorCloning => {
                let (params, _) = self
                    .bc
                    .as_ref()
                    .ok_or_else(|| Error::invalid("behavior-cloning guide has no parameters"))?;
                let obs = agent.mdp.observe(state);
                (policy_forward(agent.policy, params, &obs)?.probs, None)
            }
            GuideKind::AlphaZero => {
                let mut oracle = NetworkOracle::new(
                    agent.policy,
                    agent.policy_params,
                    agent.critic,
                    agent.critic_params,
                    agent.bins,
                );
                let cfg = SearchConfig {
                    temperature: temperature_schedule(agent.progress),
                    ..self.search
                };
                let out = run_search(agent.mdp, state, &mut oracle, &cfg, rng)?;
                (out.pi_az, Some(out.v_az))
            }
        };
        self.calls += 1;
        Ok(Some(GuideOutput {
            pi_e,
            v_target_e,
            produced_at_step: step,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{Activation, MlpSpec};
    use crate::env::EnvSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agent_parts(mdp: &MdpSpec) -> (Mlp, ParamVector, Mlp, ParamVector, Bins) {
        let spec = |o| MlpSpec {
            input_dim: mdp.num_states(),
            hidden_dim: 8,
            output_dim: o,
            num_hidden_layers: 1,
            activation: Activation::Tanh,
        };
        let policy = Mlp::new(spec(mdp.num_actions())).unwrap();
        let critic = Mlp::new(spec(5)).unwrap();
        let (pp, cp) = (policy.zeros(), critic.zeros());
        (policy, pp, critic, cp, Bins::linear(5, -1.0, 1.0).unwrap())
    }

    #[test]
    fn random_guide_is_uniform_and_scheduled() {
        let mdp = EnvSpec::grid(2, 2).build(0.99, 0).unwrap();
        let (policy, pp, critic, cp, bins) = agent_parts(&mdp);
        let view = AgentView {
            mdp: &mdp,
            policy: &policy,
            policy_params: &pp,
            critic: &critic,
            critic_params: &cp,
            bins: &bins,
            progress: 0.0,
        };
        let mut cfg = GuideConfig::new(GuideKind::Random);
        cfg.frequency = 2;
        let mut guide = Guide::new(cfg, SearchConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let present: Vec<u64> = (0..6)
            .filter(|&t| guide.guide_outputs(0, t, &view, &mut rng).unwrap().is_some())
            .collect();
        assert_eq!(present, vec![0, 2, 4]);
        assert_eq!(guide.calls(), 3);
        let out = guide.guide_outputs(0, 0, &view, &mut rng).unwrap().unwrap();
        assert_eq!(out.pi_e, vec![0.25; 4]);
        assert_eq!(out.v_target_e, None);
    }

    #[test]
    fn alphazero_guide_carries_value() {
        let mdp = EnvSpec::chain(5).build(0.99, 0).unwrap();
        let (policy, pp, critic, cp, bins) = agent_parts(&mdp);
        let view = AgentView {
            mdp: &mdp,
            policy: &policy,
            policy_params: &pp,
            critic: &critic,
            critic_params: &cp,
            bins: &bins,
            progress: 0.0,
        };
        let search = SearchConfig {
            budget: 400,
            dirichlet_mix: 0.0,
            ..SearchConfig::default()
        };
        let mut guide = Guide::new(GuideConfig::new(GuideKind::AlphaZero), search).unwrap();
        let out = guide
            .guide_outputs(3, 7, &view, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap()
            .unwrap();
        assert_eq!(out.produced_at_step, 7);
        assert!(out.pi_e[1] > out.pi_e[0]);
        assert!(out.v_target_e.unwrap() > 0.5);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [GuideKind::Random, GuideKind::BehaviorCloning, GuideKind::AlphaZero] {
            assert_eq!(k.name().parse::<GuideKind>().unwrap(), k);
        }
        assert!("mcts2".parse::<GuideKind>().is_err());
    }
}
