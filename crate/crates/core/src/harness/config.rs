//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::actor_critic::LambdaReturnConfig;
use crate::approx::{Activation, AdamConfig, Bins};
use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::guide::{GuideConfig, GuideKind, KlDirection};
use crate::mcts::SearchConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Algorithm label used to group runs in reports.
    pub name: String,
    pub seed: u64,
    /// Seeds `seed .. seed + seeds` when no single seed is requested.
    pub seeds: u64,
    pub total_env_steps: u64,
    /// 0 selects `total_env_steps / 10`.
    pub eval_every: u64,
    pub eval_episodes: usize,

    pub env_kind: String,
    pub chain_length: usize,
    pub chain_bonus: f64,
    pub grid_width: usize,
    pub grid_height: usize,
    pub grid_slip: f64,
    pub step_penalty: f64,
    pub goal_reward: f64,
    /// 0 selects `4 * num_states`.
    pub time_limit: usize,

    pub gamma: f64,
    pub lambda: f64,
    pub horizon: usize,

    pub hidden: usize,
    pub layers: usize,
    pub activation: Activation,
    pub bins_count: usize,
    pub bins_low: f64,
    pub bins_high: f64,

    pub lr: f64,
    pub adam_eps: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub grad_clip: f64,
    pub critic_ema_decay: f64,
    pub critic_ema_reg: f64,
    pub scale_ema_decay: f64,

    pub batch_size: usize,
    pub batch_length: usize,
    pub buffer_capacity: usize,
    pub train_every: u64,
    /// Environment steps collected before the first update.
    pub warmup: u64,

    /// `None` trains plain A2C.
    pub guide_kind: Option<GuideKind>,
    /// `None` takes the per-kind default.
    pub lambda_actor: Option<f64>,
    pub lambda_critic: f64,
    pub tau: f64,
    pub max_lambda: f64,
    pub guide_frequency: u64,
    pub kl: KlDirection,
    pub guide_scale_ema_decay: f64,
    /// Behavior-cloning gradient steps per update.
    pub bc_steps: usize,

    pub mcts_budget: usize,
    pub c1: f64,
    pub c2: f64,
    pub dirichlet_alpha: f64,
    pub dirichlet_mix: f64,
    pub norm_eps: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let env = EnvSpec::chain(20);
        let (chain_length, chain_bonus, goal_reward) = match env {
            EnvSpec::Chain {
                length,
                bonus,
                goal_reward,
            } => (length, bonus, goal_reward),
            _ => unreachable!(),
        };
        let adam = AdamConfig::default();
        let search = SearchConfig::default();
        Self {
            name: "a2c".into(),
            seed: 0,
            seeds: 5,
            total_env_steps: 30_000,
            eval_every: 0,
            eval_episodes: 10,
            env_kind: "chain".into(),
            chain_length,
            chain_bonus,
            grid_width: 3,
            grid_height: 3,
            grid_slip: 0.0,
            step_penalty: -0.01,
            goal_reward,
            time_limit: 0,
            gamma: 0.99,
            lambda: 0.95,
            horizon: 15,
            hidden: 64,
            layers: 2,
            activation: Activation::Tanh,
            bins_count: 41,
            bins_low: -5.0,
            bins_high: 5.0,
            lr: adam.learning_rate,
            adam_eps: adam.epsilon,
            beta1: adam.beta1,
            beta2: adam.beta2,
            grad_clip: adam.clip_norm,
            critic_ema_decay: 0.98,
            critic_ema_reg: 1.0,
            scale_ema_decay: 0.99,
            batch_size: 16,
            batch_length: 16,
            buffer_capacity: 100_000,
            train_every: 1,
            warmup: 0,
            guide_kind: None,
            lambda_actor: None,
            lambda_critic: 0.05,
            tau: 5.0,
            max_lambda: 10.0,
            guide_frequency: 1,
            kl: KlDirection::Reverse,
            guide_scale_ema_decay: 0.99,
            bc_steps: 1,
            mcts_budget: search.budget,
            c1: search.c1,
            c2: search.c2,
            dirichlet_alpha: search.dirichlet_alpha,
            dirichlet_mix: search.dirichlet_mix,
            norm_eps: search.norm_eps,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("{key}: cannot parse {value:?}")))
}

macro_rules! keys {
    ($($key:literal => $field:ident),* $(,)?) => {
        const SIMPLE_KEYS: &[&str] = &[$($key),*];

        impl RunConfig {
            fn set_simple(&mut self, key: &str, value: &str) -> Option<Result<()>> {
                match key {
                    $($key => Some(parse(key, value).map(|v| self.$field = v)),)*
                    _ => None,
                }
            }

            fn simple_entries(&self) -> Vec<(&'static str, String)> {
                vec![$(($key, self.$field.to_string())),*]
            }
        }
    };
}

keys! {
    "name" => name,
    "seed" => seed,
    "seeds" => seeds,
    "total_env_steps" => total_env_steps,
    "eval_every" => eval_every,
    "eval_episodes" => eval_episodes,
    "env.kind" => env_kind,
    "env.chain_length" => chain_length,
    "env.chain_bonus" => chain_bonus,
    "env.grid_width" => grid_width,
    "env.grid_height" => grid_height,
    "env.grid_slip" => grid_slip,
    "env.step_penalty" => step_penalty,
    "env.goal_reward" => goal_reward,
    "env.time_limit" => time_limit,
    "gamma" => gamma,
    "lambda" => lambda,
    "horizon" => horizon,
    "net.hidden" => hidden,
    "net.layers" => layers,
    "bins.count" => bins_count,
    "bins.low" => bins_low,
    "bins.high" => bins_high,
    "lr" => lr,
    "adam_eps" => adam_eps,
    "adam_beta1" => beta1,
    "adam_beta2" => beta2,
    "grad_clip" => grad_clip,
    "critic_ema_decay" => critic_ema_decay,
    "critic_ema_reg" => critic_ema_reg,
    "scale_ema_decay" => scale_ema_decay,
    "batch_size" => batch_size,
    "batch_length" => batch_length,
    "buffer_capacity" => buffer_capacity,
    "train_every" => train_every,
    "warmup" => warmup,
    "guide.lambda_critic" => lambda_critic,
    "guide.tau" => tau,
    "guide.max_lambda" => max_lambda,
    "guide.frequency" => guide_frequency,
    "guide.scale_ema_decay" => guide_scale_ema_decay,
    "guide.bc_steps" => bc_steps,
    "mcts.budget" => mcts_budget,
    "mcts.c1" => c1,
    "mcts.c2" => c2,
    "mcts.dirichlet_alpha" => dirichlet_alpha,
    "mcts.dirichlet_mix" => dirichlet_mix,
    "mcts.norm_eps" => norm_eps,
}

impl RunConfig {
    /// Every accepted key.
    pub fn keys() -> Vec<&'static str> {
        let mut keys = SIMPLE_KEYS.to_vec();
        keys.extend(["net.activation", "guide.kind", "guide.lambda_actor", "guide.kl"]);
        keys
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if let Some(r) = self.set_simple(key, value) {
            return r;
        }
        match key {
            "net.activation" => {
                self.activation =
                    Activation::parse(value).ok_or_else(|| Error::invalid(format!("unknown activation {value:?}")))?
            }
            "guide.kind" => {
                self.guide_kind = match value {
                    "none" => None,
                    other => Some(other.parse()?),
                }
            }
            "guide.lambda_actor" => {
                self.lambda_actor = match value {
                    "default" => None,
                    other => Some(parse(key, other)?),
                }
            }
            "guide.kl" => self.kl = value.parse()?,
            _ => return Err(Error::invalid(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config { line: i + 1, message };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            cfg.set(k.trim(), v.trim()).map_err(|e| err(e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = self.simple_entries();
        out.push(("net.activation", self.activation.name().to_string()));
        out.push(("guide.kind", self.guide_kind.map_or("none", |k| k.name()).to_string()));
        out.push(("guide.lambda_actor", self.resolved_lambda_actor().to_string()));
        out.push(("guide.kl", self.kl.name().to_string()));
        out.sort_by_key(|e| e.0);
        out
    }

    /// Full effective config, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn resolved_lambda_actor(&self) -> f64 {
        self.lambda_actor
            .unwrap_or_else(|| self.guide_kind.map_or(0.0, GuideKind::default_lambda_actor))
    }

    pub fn resolved_eval_every(&self) -> u64 {
        if self.eval_every > 0 {
            self.eval_every
        } else {
            (self.total_env_steps / 10).max(1)
        }
    }

    pub fn env_spec(&self) -> Result<EnvSpec> {
        match self.env_kind.as_str() {
            "chain" => Ok(EnvSpec::Chain {
                length: self.chain_length,
                bonus: self.chain_bonus,
                goal_reward: self.goal_reward,
            }),
            "grid" => Ok(EnvSpec::Grid {
                width: self.grid_width,
                height: self.grid_height,
                slip: self.grid_slip,
                step_penalty: self.step_penalty,
                goal_reward: self.goal_reward,
            }),
            other => Err(Error::invalid(format!("unknown env.kind {other:?}"))),
        }
    }

    pub fn returns(&self) -> LambdaReturnConfig {
        LambdaReturnConfig {
            lambda: self.lambda,
            horizon: self.horizon,
            gamma: self.gamma,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.lr,
            epsilon: self.adam_eps,
            beta1: self.beta1,
            beta2: self.beta2,
            clip_norm: self.grad_clip,
        }
    }

    pub fn bins(&self) -> Result<Bins> {
        Bins::linear(self.bins_count, self.bins_low, self.bins_high)
    }

    pub fn guide(&self) -> Option<GuideConfig> {
        self.guide_kind.map(|kind| GuideConfig {
            kind,
            lambda_actor: self.resolved_lambda_actor(),
            lambda_critic: self.lambda_critic,
            tau: self.tau,
            max_lambda: self.max_lambda,
            frequency: self.guide_frequency,
            kl: self.kl,
            scale_ema_decay: self.guide_scale_ema_decay,
        })
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            budget: self.mcts_budget,
            c1: self.c1,
            c2: self.c2,
            dirichlet_alpha: self.dirichlet_alpha,
            dirichlet_mix: self.dirichlet_mix,
            temperature: 1.0,
            lambda: self.lambda,
            norm_eps: self.norm_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env_spec()?;
        self.bins()?;
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid("gamma must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid("lambda must lie in [0, 1]"));
        }
        if self.batch_size == 0 || self.batch_length < 2 {
            return Err(Error::invalid(
                "batch_size must be positive and batch_length at least 2",
            ));
        }
        if self.horizon + 1 > self.batch_length {
            return Err(Error::invalid("horizon must be at most batch_length - 1"));
        }
        if self.train_every == 0 || self.eval_episodes == 0 || self.seeds == 0 {
            return Err(Error::invalid("train_every, eval_episodes and seeds must be positive"));
        }
        if self.hidden == 0 || self.layers == 0 {
            return Err(Error::invalid("net.hidden and net.layers must be positive"));
        }
        if !(0.0..1.0).contains(&self.critic_ema_decay) || !(0.0..1.0).contains(&self.scale_ema_decay) {
            return Err(Error::invalid("EMA decays must lie in [0, 1)"));
        }
        if let Some(g) = self.guide() {
            g.validate()?;
            if g.kind == GuideKind::AlphaZero {
                self.search().validate()?;
            }
        }
        Ok(())
    }
}
