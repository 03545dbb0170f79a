//! Generalized advantage estimation.
//!
//! `A_t = sum_k (gamma lambda)^k delta_{t+k}` with
//! `delta_t = r_t + gamma V(s_{t+1}) (1 - done_t) - V(s_t)`, computed by
//! the usual backward recursion. Episode ends cut the accumulation (no
//! bootstrap through `done`, including horizon ends). Returns are
//! advantages plus values.

/// Advantages and returns for one trajectory. `values[t]` estimates
/// `V(s_t)`; `bootstrap` estimates the value of the state after the last
/// step (ignored when that step ended an episode).
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n);
    assert_eq!(dones.len(), n);
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        acc = delta + gamma * lambda * not_done * acc;
        advantages[t] = acc;
    }
    let returns = advantages
        .iter()
        .zip(values)
        .map(|(a, v)| a + v)
        .collect();
    (advantages, returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force nested-sum oracle, independent of the recursion.
    fn gae_oracle(
        rewards: &[f64],
        values: &[f64],
        dones: &[bool],
        bootstrap: f64,
        gamma: f64,
        lambda: f64,
    ) -> Vec<f64> {
        let n = rewards.len();
        let delta = |t: usize| -> f64 {
            let not_done = if dones[t] { 0.0 } else { 1.0 };
            let nv = if t + 1 < n { values[t + 1] } else { bootstrap };
            rewards[t] + gamma * nv * not_done - values[t]
        };
        (0..n)
            .map(|t| {
                let mut total = 0.0;
                let mut weight = 1.0;
                for k in t..n {
                    total += weight * delta(k);
                    if dones[k] {
                        break;
                    }
                    weight *= gamma * lambda;
                }
                total
            })
            .collect()
    }

    #[test]
    fn lambda_zero_is_one_step_td() {
        let rewards = [1.0, -0.5, 2.0];
        let values = [0.3, 0.1, -0.2];
        let dones = [false, false, true];
        let (adv, _) = compute_gae(&rewards, &values, &dones, 9.9, 0.97, 0.0);
        for t in 0..3 {
            let nv = if t + 1 < 3 { values[t + 1] } else { 9.9 };
            let not_done = if dones[t] { 0.0 } else { 1.0 };
            let delta = rewards[t] + 0.97 * nv * not_done - values[t];
            assert!((adv[t] - delta).abs() < 1e-15, "t={t}");
        }
    }

    #[test]
    fn undiscounted_reward_to_go() {
        // gamma = lambda = 1, zero values: A_t is the reward-to-go.
        let rewards = [1.0, 2.0, 3.0, 4.0];
        let values = [0.0; 4];
        let dones = [false, false, false, true];
        let (adv, returns) = compute_gae(&rewards, &values, &dones, 0.0, 1.0, 1.0);
        assert_eq!(adv, vec![10.0, 9.0, 7.0, 4.0]);
        assert_eq!(returns, adv);
    }

    #[test]
    fn matches_brute_force_on_random_episodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for case in 0..50 {
            let n = rng.random_range(1..=10);
            let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut dones: Vec<bool> = (0..n).map(|_| rng.random_range(0..4) == 0).collect();
            if case % 2 == 0 {
                *dones.last_mut().unwrap() = true;
            }
            let bootstrap = rng.random_range(-1.0..1.0);
            let gamma = rng.random_range(0.9..1.0);
            let lambda = rng.random_range(0.8..1.0);
            let (adv, returns) =
                compute_gae(&rewards, &values, &dones, bootstrap, gamma, lambda);
            let oracle = gae_oracle(&rewards, &values, &dones, bootstrap, gamma, lambda);
            for t in 0..n {
                assert!(
                    (adv[t] - oracle[t]).abs() < 1e-10,
                    "case {case} t={t}: {} vs {}",
                    adv[t],
                    oracle[t]
                );
                assert!((returns[t] - (oracle[t] + values[t])).abs() < 1e-10);
            }
        }
    }
}
