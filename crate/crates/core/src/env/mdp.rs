use rand::Rng;

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

/// A finite MDP with dense transition and reward tables.
///
/// The simulator doubles as the world model queried by the search guide and
/// by the λ-return targets, so it is immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpSpec {
    num_states: usize,
    num_actions: usize,
    /// `transition[(s * A + a) * S + s']`
    transition: Vec<f64>,
    /// `reward[s * A + a]`, the expected reward of taking `a` in `s`.
    reward: Vec<f64>,
    terminal: Vec<bool>,
    gamma: f64,
    initial: Vec<f64>,
    time_limit: usize,
}

/// Outcome of a single environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: usize,
    pub reward: f64,
    /// False exactly when `next_state` is terminal.
    pub continues: bool,
}

impl MdpSpec {
    /// Builds and validates an MDP.
    ///
    /// `transition` is laid out as `[s][a][s']` and `reward` as `[s][a]`.
    /// `time_limit` of zero selects the default of `4 * num_states`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        terminal: Vec<bool>,
        gamma: f64,
        initial: Vec<f64>,
        time_limit: usize,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidMdp("state and action counts must be positive".into()));
        }
        let (s, a) = (num_states, num_actions);
        if transition.len() != s * a * s {
            return Err(Error::InvalidMdp(format!(
                "transition table has {} entries, expected {}",
                transition.len(),
                s * a * s
            )));
        }
        if reward.len() != s * a || terminal.len() != s || initial.len() != s {
            return Err(Error::InvalidMdp(
                "reward/terminal/initial lengths disagree with num_states".into(),
            ));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("discount {gamma} outside [0, 1]")));
        }
        for (row, probs) in transition.chunks_exact(s).enumerate() {
            if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidMdp(format!(
                    "negative or non-finite probability in row {row}"
                )));
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidMdp(format!(
                    "transition row (s={}, a={}) sums to {sum}",
                    row / a,
                    row % a
                )));
            }
        }
        if let Some(i) = reward.iter().position(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp(format!(
                "non-finite reward at (s={}, a={})",
                i / a,
                i % a
            )));
        }
        for state in (0..s).filter(|&st| terminal[st]) {
            for action in 0..a {
                let row = &transition[(state * a + action) * s..(state * a + action + 1) * s];
                if row[state] != 1.0 || reward[state * a + action] != 0.0 {
                    return Err(Error::InvalidMdp(format!(
                        "terminal state {state} must self-loop with zero reward"
                    )));
                }
            }
        }
        let init_sum: f64 = initial.iter().sum();
        if initial.iter().any(|p| *p < 0.0) || (init_sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidMdp("initial distribution is not on the simplex".into()));
        }
        if (0..s).all(|st| terminal[st] || initial[st] == 0.0) {
            return Err(Error::InvalidMdp(
                "initial distribution only covers terminal states".into(),
            ));
        }
        let time_limit = if time_limit == 0 { 4 * s } else { time_limit };
        Ok(Self {
            num_states,
            num_actions,
            transition,
            reward,
            terminal,
            gamma,
            initial,
            time_limit,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn time_limit(&self) -> usize {
        self.time_limit
    }

    pub fn initial_distribution(&self) -> &[f64] {
        &self.initial
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal[state]
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.reward[state * self.num_actions + action]
    }

    pub fn transition_row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.num_actions + action) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    /// Returns a copy with a different discount, keeping everything else.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("discount {gamma} outside [0, 1]")));
        }
        Ok(Self { gamma, ..self.clone() })
    }

    pub fn with_time_limit(&self, time_limit: usize) -> Self {
        Self {
            time_limit: if time_limit == 0 {
                4 * self.num_states
            } else {
                time_limit
            },
            ..self.clone()
        }
    }

    /// Draws a start state from the initial distribution.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.initial, rng)
    }

    pub fn step<R: Rng + ?Sized>(&self, state: usize, action: usize, rng: &mut R) -> Result<StepOutcome> {
        if state >= self.num_states || action >= self.num_actions {
            return Err(Error::invalid(format!("state {state} / action {action} out of range")));
        }
        if self.terminal[state] {
            return Err(Error::TerminalStep { state });
        }
        let next_state = sample_categorical(self.transition_row(state, action), rng);
        Ok(StepOutcome {
            next_state,
            reward: self.reward(state, action),
            continues: !self.terminal[next_state],
        })
    }

    /// One-hot observation vector for `state`.
    pub fn observe(&self, state: usize) -> Vec<f64> {
        one_hot(state, self.num_states)
    }
}

pub fn one_hot(index: usize, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    v
}

/// Inverse-CDF draw from a probability vector. Falls back to the last index
/// with positive mass when rounding leaves the cumulative sum short of `u`.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}
