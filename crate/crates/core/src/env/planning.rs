//! Exact dynamic-programming oracles over an [`MdpSpec`].

use super::mdp::MdpSpec;
use crate::error::{Error, Result};

/// Ties within this margin go to the lowest action index.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub values: Vec<f64>,
    pub policy: Vec<usize>,
}

/// One-step lookahead `r(s,a) + γ Σ T(s'|s,a) V(s')`.
pub fn q_value(mdp: &MdpSpec, values: &[f64], state: usize, action: usize) -> f64 {
    let expected: f64 = mdp
        .transition_row(state, action)
        .iter()
        .zip(values)
        .map(|(p, v)| p * v)
        .sum();
    mdp.reward(state, action) + mdp.gamma() * expected
}

fn bellman_backup(mdp: &MdpSpec, values: &[f64]) -> Vec<f64> {
    (0..mdp.num_states())
        .map(|s| {
            if mdp.is_terminal(s) {
                0.0
            } else {
                (0..mdp.num_actions())
                    .map(|a| q_value(mdp, values, s, a))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest |T V − V| over states.
pub fn bellman_residual(mdp: &MdpSpec, values: &[f64]) -> f64 {
    sup_diff(&bellman_backup(mdp, values), values)
}

pub fn greedy_policy(mdp: &MdpSpec, values: &[f64]) -> Vec<usize> {
    (0..mdp.num_states())
        .map(|s| {
            let qs: Vec<f64> = (0..mdp.num_actions()).map(|a| q_value(mdp, values, s, a)).collect();
            let best = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            qs.iter().position(|&q| q >= best - TIE_TOL).unwrap_or(0)
        })
        .collect()
}

/// Every action whose one-step value is within `tol` of the best.
pub fn optimal_actions(mdp: &MdpSpec, values: &[f64], state: usize, tol: f64) -> Vec<usize> {
    let qs: Vec<f64> = (0..mdp.num_actions()).map(|a| q_value(mdp, values, state, a)).collect();
    let best = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..qs.len()).filter(|&a| qs[a] >= best - tol).collect()
}

/// Value iteration. Sweeps stop once the returned values are provably within
/// `tol` of the fixed point (sup-norm), which also bounds the Bellman
/// residual by `tol`.
pub fn value_iteration(mdp: &MdpSpec, tol: f64) -> Result<Solution> {
    if !(tol > 0.0) {
        return Err(Error::invalid("value iteration tolerance must be positive"));
    }
    let mut values = vec![0.0; mdp.num_states()];
    let max_iters = iteration_cap(mdp, tol);
    let stop = stopping_delta(mdp.gamma(), tol);
    for _ in 0..max_iters {
        let next = bellman_backup(mdp, &values);
        let delta = sup_diff(&next, &values);
        values = next;
        if delta <= stop {
            let policy = greedy_policy(mdp, &values);
            return Ok(Solution { values, policy });
        }
    }
    Err(Error::invalid(format!(
        "value iteration did not converge in {max_iters} sweeps"
    )))
}

/// Iterative evaluation of a stochastic policy (`policy[s]` is a simplex over
/// actions).
pub fn policy_evaluation(mdp: &MdpSpec, policy: &[Vec<f64>], tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::invalid("policy evaluation tolerance must be positive"));
    }
    check_policy(mdp, policy)?;
    let mut values = vec![0.0; mdp.num_states()];
    let max_iters = iteration_cap(mdp, tol);
    let stop = stopping_delta(mdp.gamma(), tol);
    for _ in 0..max_iters {
        let next: Vec<f64> = (0..mdp.num_states())
            .map(|s| {
                if mdp.is_terminal(s) {
                    0.0
                } else {
                    policy[s]
                        .iter()
                        .enumerate()
                        .map(|(a, p)| p * q_value(mdp, &values, s, a))
                        .sum()
                }
            })
            .collect();
        let delta = sup_diff(&next, &values);
        values = next;
        if delta <= stop {
            return Ok(values);
        }
    }
    Err(Error::invalid(format!(
        "policy evaluation did not converge in {max_iters} sweeps"
    )))
}

/// Expected return of `policy` over at most `horizon` steps with the given
/// discount (1.0 for the undiscounted episode score), by backward induction.
pub fn finite_horizon_value(mdp: &MdpSpec, policy: &[Vec<f64>], horizon: usize, discount: f64) -> Result<Vec<f64>> {
    check_policy(mdp, policy)?;
    let mut values = vec![0.0; mdp.num_states()];
    for _ in 0..horizon {
        values = (0..mdp.num_states())
            .map(|s| {
                if mdp.is_terminal(s) {
                    return 0.0;
                }
                policy[s]
                    .iter()
                    .enumerate()
                    .map(|(a, p)| {
                        let next: f64 = mdp.transition_row(s, a).iter().zip(&values).map(|(t, v)| t * v).sum();
                        p * (mdp.reward(s, a) + discount * next)
                    })
                    .sum()
            })
            .collect();
    }
    Ok(values)
}

/// Deterministic policy as a row-per-state simplex.
pub fn deterministic_policy(num_actions: usize, actions: &[usize]) -> Vec<Vec<f64>> {
    actions
        .iter()
        .map(|&a| {
            let mut row = vec![0.0; num_actions];
            row[a] = 1.0;
            row
        })
        .collect()
}

pub fn uniform_policy(mdp: &MdpSpec) -> Vec<Vec<f64>> {
    vec![vec![1.0 / mdp.num_actions() as f64; mdp.num_actions()]; mdp.num_states()]
}

fn check_policy(mdp: &MdpSpec, policy: &[Vec<f64>]) -> Result<()> {
    if policy.len() != mdp.num_states() {
        return Err(Error::Shape {
            context: "policy rows",
            expected: mdp.num_states(),
            actual: policy.len(),
        });
    }
    for (s, row) in policy.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if row.len() != mdp.num_actions() || row.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("policy row {s} is not on the action simplex")));
        }
    }
    Ok(())
}

/// Successive-iterate gap that puts a γ-contraction within `tol` of its
/// fixed point: ‖V − V*‖ ≤ γ/(1−γ)·‖ΔV‖.
fn stopping_delta(gamma: f64, tol: f64) -> f64 {
    if gamma < 1.0 && gamma > 0.0 {
        tol * (1.0 - gamma) / gamma
    } else if gamma == 0.0 {
        tol
    } else {
        tol * 1e-6
    }
}

fn iteration_cap(mdp: &MdpSpec, tol: f64) -> usize {
    // generous for γ < 1; proper (terminating) MDPs with γ = 1 converge too
    let base = if mdp.gamma() < 1.0 {
        ((tol.ln() - 10.0) / mdp.gamma().max(1e-12).ln()).abs().ceil() as usize
    } else {
        0
    };
    base.max(1_000_000 / mdp.num_states().max(1)).max(10_000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::builtin::{chain_mdp, EnvSpec};

    fn line(gamma: f64) -> MdpSpec {
        // s0 -> s1 -> s2 (terminal); reward 1 only on entering s2
        let (s, a) = (3, 1);
        let mut t = vec![0.0; s * a * s];
        t[1] = 1.0;
        t[3 + 2] = 1.0;
        t[6 + 2] = 1.0;
        MdpSpec::new(
            s,
            a,
            t,
            vec![0.0, 1.0, 0.0],
            vec![false, false, true],
            gamma,
            vec![1.0, 0.0, 0.0],
            0,
        )
        .unwrap()
    }

    #[test]
    fn one_step_problem() {
        let t = vec![0.0, 1.0, 0.0, 1.0];
        let mdp = MdpSpec::new(2, 1, t, vec![1.0, 0.0], vec![false, true], 0.5, vec![1.0, 0.0], 0).unwrap();
        let sol = value_iteration(&mdp, 1e-12).unwrap();
        assert_eq!(sol.values[0], 1.0);
    }

    #[test]
    fn three_state_chain_by_hand() {
        let sol = value_iteration(&line(0.9), 1e-12).unwrap();
        // V(s1) = 1, V(s0) = 0.9 under this reward placement
        assert!((sol.values[1] - 1.0).abs() < 1e-12);
        assert!((sol.values[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn reward_collected_in_goal_state() {
        // s0 -> s1 -> s2, and acting in s2 pays 1 then ends in an absorbing s3
        let (s, a) = (4, 1);
        let mut t = vec![0.0; s * a * s];
        t[1] = 1.0;
        t[4 + 2] = 1.0;
        t[8 + 3] = 1.0;
        t[12 + 3] = 1.0;
        let mdp = MdpSpec::new(
            s,
            a,
            t,
            vec![0.0, 0.0, 1.0, 0.0],
            vec![false, false, false, true],
            0.9,
            vec![1.0, 0.0, 0.0, 0.0],
            0,
        )
        .unwrap();
        let sol = value_iteration(&mdp, 1e-12).unwrap();
        assert!((sol.values[0] - 0.81).abs() < 1e-12);
        assert!((sol.values[1] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn myopic_limit() {
        let mdp = chain_mdp(5, 0.3, 1.0, 0.0, 0).unwrap();
        let sol = value_iteration(&mdp, 1e-12).unwrap();
        for s in 0..5 {
            let best = (0..2).map(|a| mdp.reward(s, a)).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(sol.values[s], best);
        }
    }

    #[test]
    fn residual_bound_and_greedy_consistency() {
        for env in [EnvSpec::chain(8), EnvSpec::grid(4, 3)] {
            let mdp = env.build(0.95, 0).unwrap();
            let tol = 1e-8;
            let sol = value_iteration(&mdp, tol).unwrap();
            assert!(bellman_residual(&mdp, &sol.values) <= tol);
            let pi = deterministic_policy(mdp.num_actions(), &sol.policy);
            let v_pi = policy_evaluation(&mdp, &pi, tol).unwrap();
            let gap = sup_diff(&v_pi, &sol.values);
            assert!(gap <= 2.0 * tol, "gap {gap}");
        }
    }

    #[test]
    fn zero_reward_symmetric_mdp() {
        let t = vec![0.5; 8];
        let mdp = MdpSpec::new(2, 2, t, vec![0.0; 4], vec![false; 2], 0.9, vec![0.5, 0.5], 0).unwrap();
        let v = policy_evaluation(&mdp, &uniform_policy(&mdp), 1e-10).unwrap();
        assert_eq!(v, vec![0.0, 0.0]);
    }
}
