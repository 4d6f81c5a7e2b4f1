//! Built-in environments: a hard-exploration chain and a gridworld.

use serde::{Deserialize, Serialize};

use super::mdp::MdpSpec;
use crate::error::{Error, Result};

pub const CHAIN_LEFT: usize = 0;
pub const CHAIN_RIGHT: usize = 1;

pub const GRID_UP: usize = 0;
pub const GRID_DOWN: usize = 1;
pub const GRID_LEFT: usize = 2;
pub const GRID_RIGHT: usize = 3;

/// Declarative description of a built-in environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    Chain {
        length: usize,
        /// Reward for taking `left` in state 0 (the distractor).
        bonus: f64,
        goal_reward: f64,
    },
    Grid {
        width: usize,
        height: usize,
        /// Probability mass moved to the two perpendicular directions, split evenly.
        slip: f64,
        step_penalty: f64,
        goal_reward: f64,
    },
}

impl EnvSpec {
    pub fn chain(length: usize) -> Self {
        EnvSpec::Chain {
            length,
            bonus: 0.001,
            goal_reward: 1.0,
        }
    }

    pub fn grid(width: usize, height: usize) -> Self {
        EnvSpec::Grid {
            width,
            height,
            slip: 0.0,
            step_penalty: -0.01,
            goal_reward: 1.0,
        }
    }

    pub fn build(&self, gamma: f64, time_limit: usize) -> Result<MdpSpec> {
        match *self {
            EnvSpec::Chain {
                length,
                bonus,
                goal_reward,
            } => chain_mdp(length, bonus, goal_reward, gamma, time_limit),
            EnvSpec::Grid {
                width,
                height,
                slip,
                step_penalty,
                goal_reward,
            } => grid_mdp(width, height, slip, step_penalty, goal_reward, gamma, time_limit),
        }
    }

    pub fn label(&self) -> String {
        match self {
            EnvSpec::Chain { length, .. } => format!("chain{length}"),
            EnvSpec::Grid { width, height, .. } => format!("grid{width}x{height}"),
        }
    }
}

/// Chain of `length` states. State 0 is the start; `left` there stays put and
/// pays `bonus`. Stepping `right` out of `length - 2` reaches the terminal
/// goal and pays `goal_reward`. Every other transition pays nothing.
pub fn chain_mdp(length: usize, bonus: f64, goal_reward: f64, gamma: f64, time_limit: usize) -> Result<MdpSpec> {
    if length < 2 {
        return Err(Error::InvalidMdp("chain needs at least two states".into()));
    }
    let (s, a) = (length, 2);
    let goal = length - 1;
    let mut t = vec![0.0; s * a * s];
    let mut r = vec![0.0; s * a];
    let mut terminal = vec![false; s];
    terminal[goal] = true;
    for state in 0..s {
        let idx = |action: usize, next: usize| (state * a + action) * s + next;
        if state == goal {
            t[idx(CHAIN_LEFT, goal)] = 1.0;
            t[idx(CHAIN_RIGHT, goal)] = 1.0;
            continue;
        }
        t[idx(CHAIN_LEFT, state.saturating_sub(1))] = 1.0;
        t[idx(CHAIN_RIGHT, state + 1)] = 1.0;
        if state == 0 {
            r[CHAIN_LEFT] = bonus;
        }
        if state + 1 == goal {
            r[state * a + CHAIN_RIGHT] = goal_reward;
        }
    }
    let mut initial = vec![0.0; s];
    initial[0] = 1.0;
    MdpSpec::new(s, a, t, r, terminal, gamma, initial, time_limit)
}

/// `width x height` gridworld. State `row * width + col`; the start is (0, 0)
/// and the terminal goal is the opposite corner. Moving into a wall leaves
/// the agent in place.
pub fn grid_mdp(
    width: usize,
    height: usize,
    slip: f64,
    step_penalty: f64,
    goal_reward: f64,
    gamma: f64,
    time_limit: usize,
) -> Result<MdpSpec> {
    if width * height < 2 {
        return Err(Error::InvalidMdp("grid needs at least two cells".into()));
    }
    if !(0.0..=1.0).contains(&slip) {
        return Err(Error::InvalidMdp(format!("slip probability {slip} outside [0, 1]")));
    }
    let (s, a) = (width * height, 4);
    let goal = s - 1;
    let mv = |state: usize, dir: usize| -> usize {
        let (row, col) = (state / width, state % width);
        let (row, col) = match dir {
            GRID_UP => (row.saturating_sub(1), col),
            GRID_DOWN => ((row + 1).min(height - 1), col),
            GRID_LEFT => (row, col.saturating_sub(1)),
            _ => (row, (col + 1).min(width - 1)),
        };
        row * width + col
    };
    let perpendicular = |dir: usize| -> [usize; 2] {
        match dir {
            GRID_UP | GRID_DOWN => [GRID_LEFT, GRID_RIGHT],
            _ => [GRID_UP, GRID_DOWN],
        }
    };
    let mut t = vec![0.0; s * a * s];
    let mut r = vec![0.0; s * a];
    let mut terminal = vec![false; s];
    terminal[goal] = true;
    for state in 0..s {
        for action in 0..a {
            let row = &mut t[(state * a + action) * s..(state * a + action + 1) * s];
            if state == goal {
                row[goal] = 1.0;
                continue;
            }
            row[mv(state, action)] += 1.0 - slip;
            for side in perpendicular(action) {
                row[mv(state, side)] += slip / 2.0;
            }
            let p_goal = row[goal];
            r[state * a + action] = p_goal * goal_reward + (1.0 - p_goal) * step_penalty;
        }
    }
    let mut initial = vec![0.0; s];
    initial[0] = 1.0;
    MdpSpec::new(s, a, t, r, terminal, gamma, initial, time_limit)
}
