use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaReturnConfig {
    pub lambda: f64,
    /// Maximum bootstrap depth N.
    pub horizon: usize,
    pub gamma: f64,
}

impl Default for LambdaReturnConfig {
    fn default() -> Self {
        Self {
            lambda: 0.95,
            horizon: 15,
            gamma: 0.99,
        }
    }
}

/// λ-return of depth `depth` starting at position `t`:
///
/// `R⁰_t = V_t`, `Rᴺ_t = r_t + γ c_t ((1−λ) V_{t+1} + λ Rᴺ⁻¹_{t+1})`.
///
/// `values` holds one more entry than `rewards`: the value of the state
/// reached by the last transition.
pub fn lambda_return_at(
    rewards: &[f64],
    continues: &[bool],
    values: &[f64],
    t: usize,
    depth: usize,
    cfg: &LambdaReturnConfig,
) -> f64 {
    let mut g = values[t + depth];
    for j in (t..t + depth).rev() {
        let c = if continues[j] { 1.0 } else { 0.0 };
        g = rewards[j] + cfg.gamma * c * ((1.0 - cfg.lambda) * values[j + 1] + cfg.lambda * g);
    }
    g
}

/// λ-returns for every position of a window of `rewards.len()` transitions.
/// Position `t` uses depth `min(horizon, len − t)`, i.e. it bootstraps from
/// the furthest value available inside the window.
pub fn lambda_returns(
    rewards: &[f64],
    continues: &[bool],
    values: &[f64],
    cfg: &LambdaReturnConfig,
) -> Result<Vec<f64>> {
    let len = rewards.len();
    if continues.len() != len || values.len() != len + 1 {
        return Err(Error::Shape {
            context: "lambda_returns values (rewards + 1)",
            expected: len + 1,
            actual: values.len(),
        });
    }
    if !(0.0..=1.0).contains(&cfg.lambda) {
        return Err(Error::invalid(format!("lambda {} outside [0, 1]", cfg.lambda)));
    }
    Ok((0..len)
        .map(|t| lambda_return_at(rewards, continues, values, t, cfg.horizon.min(len - t), cfg))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn depth_zero_is_the_value() {
        let cfg = LambdaReturnConfig {
            lambda: 0.7,
            horizon: 0,
            gamma: 0.9,
        };
        let out = lambda_returns(&[1.0, 2.0], &[true, true], &[0.3, -0.4, 5.0], &cfg).unwrap();
        assert_eq!(out, vec![0.3, -0.4]);
    }

    #[test]
    fn depth_one_is_td_target() {
        for lambda in [0.0, 0.4, 1.0] {
            let cfg = LambdaReturnConfig {
                lambda,
                horizon: 1,
                gamma: 0.9,
            };
            let out = lambda_returns(&[1.0, 2.0], &[true, false], &[0.3, -0.4, 5.0], &cfg).unwrap();
            assert!((out[0] - (1.0 + 0.9 * -0.4)).abs() < 1e-15);
            assert_eq!(out[1], 2.0);
        }
    }

    #[test]
    fn lambda_zero_is_one_step_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let len = 12;
        let r: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<bool> = (0..len).map(|_| rng.random_bool(0.8)).collect();
        let v: Vec<f64> = (0..=len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = LambdaReturnConfig {
            lambda: 0.0,
            horizon: 15,
            gamma: 0.97,
        };
        let out = lambda_returns(&r, &c, &v, &cfg).unwrap();
        for t in 0..len {
            let td = r[t] + 0.97 * if c[t] { v[t + 1] } else { 0.0 };
            assert!((out[t] - td).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_one_is_discounted_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let len = rng.random_range(1..12);
            let r: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..=len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cfg = LambdaReturnConfig {
                lambda: 1.0,
                horizon: len,
                gamma: 0.9,
            };
            let out = lambda_returns(&r, &vec![true; len], &v, &cfg).unwrap();
            let direct: f64 =
                (0..len).map(|k| 0.9_f64.powi(k as i32) * r[k]).sum::<f64>() + 0.9_f64.powi(len as i32) * v[len];
            assert!((out[0] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch() {
        let cfg = LambdaReturnConfig::default();
        assert!(lambda_returns(&[1.0], &[true], &[0.0], &cfg).is_err());
    }
}
