//! Rollout storage for one PPO update.
//!
//! Rows are stored time-major (`step * n_envs + env`), one row per
//! transition: normalized-and-masked observation, pre-squash action
//! sample, its log-density, reward, value estimate, and the done flag.
//! Advantages are normalized to zero mean / unit variance per update.

use ndarray::{Array1, Array2};

use super::gae::compute_gae;

#[derive(Clone, Debug)]
pub struct TrajectoryBuffer {
    pub n_envs: usize,
    /// Steps per environment.
    pub rollout_len: usize,
    pub obs: Array2<f64>,
    /// Pre-squash Gaussian samples.
    pub u: Array2<f64>,
    pub log_probs: Array1<f64>,
    pub rewards: Array1<f64>,
    pub values: Array1<f64>,
    pub dones: Vec<bool>,
    pub advantages: Array1<f64>,
    pub returns: Array1<f64>,
    filled: usize,
}

impl TrajectoryBuffer {
    pub fn new(rollout_len: usize, n_envs: usize, obs_dim: usize, act_dim: usize) -> Self {
        let cap = rollout_len * n_envs;
        TrajectoryBuffer {
            n_envs,
            rollout_len,
            obs: Array2::zeros((cap, obs_dim)),
            u: Array2::zeros((cap, act_dim)),
            log_probs: Array1::zeros(cap),
            rewards: Array1::zeros(cap),
            values: Array1::zeros(cap),
            dones: vec![false; cap],
            advantages: Array1::zeros(cap),
            returns: Array1::zeros(cap),
            filled: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.rollout_len * self.n_envs
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.capacity()
    }

    pub fn clear(&mut self) {
        self.filled = 0;
    }

    /// Append one environment transition. Rows must arrive in step-major
    /// order (all envs for step 0, then step 1, ...).
    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        obs: &[f64],
        u: [f64; 4],
        log_prob: f64,
        reward: f64,
        value: f64,
        done: bool,
    ) {
        assert!(!self.is_full(), "buffer already full");
        let i = self.filled;
        self.obs.row_mut(i).assign(&Array1::from_vec(obs.to_vec()));
        for (j, uj) in u.iter().enumerate() {
            self.u[[i, j]] = *uj;
        }
        self.log_probs[i] = log_prob;
        self.rewards[i] = reward;
        self.values[i] = value;
        self.dones[i] = done;
        self.filled += 1;
    }

    /// Compute per-env GAE with the given bootstrap values (one per env,
    /// the critic's estimate of the state after the last stored step),
    /// then normalize advantages across the whole buffer.
    pub fn finish(&mut self, bootstrap: &[f64], gamma: f64, lambda: f64) {
        assert!(self.is_full(), "finish() on a partial buffer");
        assert_eq!(bootstrap.len(), self.n_envs);
        for e in 0..self.n_envs {
            let idx = |t: usize| t * self.n_envs + e;
            let rewards: Vec<f64> = (0..self.rollout_len).map(|t| self.rewards[idx(t)]).collect();
            let values: Vec<f64> = (0..self.rollout_len).map(|t| self.values[idx(t)]).collect();
            let dones: Vec<bool> = (0..self.rollout_len).map(|t| self.dones[idx(t)]).collect();
            let (adv, ret) = compute_gae(&rewards, &values, &dones, bootstrap[e], gamma, lambda);
            for t in 0..self.rollout_len {
                self.advantages[idx(t)] = adv[t];
                self.returns[idx(t)] = ret[t];
            }
        }
        let n = self.capacity() as f64;
        let mean = self.advantages.sum() / n;
        let var = self
            .advantages
            .iter()
            .map(|a| (a - mean) * (a - mean))
            .sum::<f64>()
            / n;
        let std = var.sqrt().max(1e-8);
        self.advantages.mapv_inplace(|a| (a - mean) / std);
    }

    /// Mean of the per-step rewards in the buffer (a cheap training signal).
    pub fn mean_reward(&self) -> f64 {
        self.rewards.sum() / self.capacity() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advantages_are_normalized() {
        let mut buf = TrajectoryBuffer::new(8, 2, 3, 4);
        for t in 0..8 {
            for e in 0..2 {
                let r = (t * 2 + e) as f64 * 0.37 - 1.0;
                buf.push(&[0.0, 0.0, 0.0], [0.0; 4], -1.0, r, 0.1 * r, t == 7);
            }
        }
        buf.finish(&[0.0, 0.0], 0.99, 0.95);
        let n = buf.capacity() as f64;
        let mean = buf.advantages.sum() / n;
        let var = buf.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-8, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 1e-6, "std {}", var.sqrt());
    }

    #[test]
    #[should_panic(expected = "partial buffer")]
    fn finish_requires_full_buffer() {
        let mut buf = TrajectoryBuffer::new(4, 1, 2, 4);
        buf.push(&[0.0, 0.0], [0.0; 4], 0.0, 0.0, 0.0, false);
        buf.finish(&[0.0], 0.99, 0.95);
    }
}
