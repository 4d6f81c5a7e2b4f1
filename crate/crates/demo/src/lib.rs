//! WebAssembly bindings for a static demo page. Every export returns plain
//! numbers or a JSON string so the page needs no glue beyond wasm-bindgen.

use guided_rl::approx::{expected_value, two_hot_encode, Bins};
use guided_rl::env::{value_iteration, EnvSpec};
use guided_rl::guide::adaptive_weight;
use guided_rl::mcts::{run_search, SearchConfig, UniformOracle};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Exact and search-based view of one gridworld.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridView {
    pub width: usize,
    pub height: usize,
    /// Optimal state values, row-major.
    pub values: Vec<f64>,
    /// Value-iteration greedy action per state (up, down, left, right).
    pub greedy: Vec<usize>,
    /// Search policy per state; empty for the terminal goal.
    pub search: Vec<Vec<f64>>,
}

pub fn grid_view(width: usize, height: usize, slip: f64, budget: usize, seed: u64) -> Result<GridView, String> {
    let spec = EnvSpec::Grid {
        width,
        height,
        slip,
        step_penalty: -0.01,
        goal_reward: 1.0,
    };
    let mdp = spec.build(0.99, 0).map_err(|e| e.to_string())?;
    let solution = value_iteration(&mdp, 1e-10).map_err(|e| e.to_string())?;
    let cfg = SearchConfig {
        budget,
        dirichlet_mix: 0.0,
        ..SearchConfig::default()
    };
    let mut oracle = UniformOracle {
        num_actions: mdp.num_actions(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let search = (0..mdp.num_states())
        .map(|s| {
            if mdp.is_terminal(s) {
                Ok(Vec::new())
            } else {
                run_search(&mdp, s, &mut oracle, &cfg, &mut rng)
                    .map(|r| r.pi_az)
                    .map_err(|e| e.to_string())
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(GridView {
        width,
        height,
        values: solution.values,
        greedy: solution.policy,
        search,
    })
}

/// Two-hot weights of `x` over `count` evenly spaced bins, followed by the
/// decoded expected value as the last element.
pub fn two_hot_with_decode(x: f64, count: usize, low: f64, high: f64) -> Result<Vec<f64>, String> {
    let bins = Bins::linear(count, low, high).map_err(|e| e.to_string())?;
    let mut w = two_hot_encode(x, &bins);
    let decoded = expected_value(bins.values(), &w);
    w.push(decoded);
    Ok(w)
}

/// Adaptive guide weight sampled at `points` evenly spaced value gaps in
/// `[gap_lo, gap_hi]`.
pub fn weight_curve(
    lambda_a: f64,
    tau: f64,
    scale: f64,
    max_lambda: f64,
    gap_lo: f64,
    gap_hi: f64,
    points: usize,
) -> Vec<f64> {
    let step = if points > 1 {
        (gap_hi - gap_lo) / (points - 1) as f64
    } else {
        0.0
    };
    (0..points)
        .map(|i| adaptive_weight(gap_lo + step * i as f64, 0.0, scale, lambda_a, tau, max_lambda))
        .collect()
}

#[wasm_bindgen]
pub fn grid(width: usize, height: usize, slip: f64, budget: usize, seed: u64) -> Result<String, JsError> {
    let view = grid_view(width, height, slip, budget, seed).map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&view).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn two_hot(x: f64, count: usize, low: f64, high: f64) -> Result<Vec<f64>, JsError> {
    two_hot_with_decode(x, count, low, high).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn guide_weight_curve(
    lambda_a: f64,
    tau: f64,
    scale: f64,
    max_lambda: f64,
    gap_lo: f64,
    gap_hi: f64,
    points: usize,
) -> Vec<f64> {
    weight_curve(lambda_a, tau, scale, max_lambda, gap_lo, gap_hi, points)
}
