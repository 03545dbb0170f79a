//! Actor-critic parameters and the squashed-Gaussian action head.
//!
//! The actor MLP outputs pre-squash means; actions are drawn from the
//! diagonal Gaussian, squashed by `tanh`, and scaled to the per-step
//! action limits. Log-densities carry the full change-of-variables
//! correction, so they are genuine densities of the environment action.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::env::Action;

use super::mlp::Mlp;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;
const SQUASH_EPS: f64 = 1e-8;
const LOG_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Error)]
pub enum RlError {
    #[error("network produced a non-finite output")]
    NonFiniteOutput,
    #[error("non-finite gradient in minibatch {minibatch}")]
    NonFiniteGradient { minibatch: usize },
}

/// Actor and critic weights plus the state-independent log-std head.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub critic: Mlp,
    /// Per-component log standard deviation, clamped to
    /// `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub log_std: Array1<f64>,
    /// Scale applied after tanh: the per-step action limits.
    pub action_limits: [f64; 4],
}

/// What `act` records alongside the environment action.
#[derive(Clone, Copy, Debug)]
pub struct ActSample {
    /// Pre-squash Gaussian sample (the quantity the update re-evaluates).
    pub u: [f64; 4],
    /// Log-density of the squashed, scaled action.
    pub log_prob: f64,
    /// Critic value estimate for the observation.
    pub value: f64,
}

impl PolicyParams {
    /// Fresh networks: `obs_dim -> hidden.. -> act_dim` tanh actor and a
    /// matching critic with a scalar head.
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        action_limits: [f64; 4],
        log_std_init: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut actor_dims = vec![obs_dim];
        actor_dims.extend_from_slice(hidden);
        actor_dims.push(act_dim);
        let mut critic_dims = vec![obs_dim];
        critic_dims.extend_from_slice(hidden);
        critic_dims.push(1);
        let mut actor = Mlp::new(&actor_dims, rng);
        // Small initial head keeps early actions near the mean path.
        actor.scale_last_layer(0.01);
        let critic = Mlp::new(&critic_dims, rng);
        PolicyParams {
            actor,
            critic,
            log_std: Array1::from_elem(act_dim, log_std_init.clamp(LOG_STD_MIN, LOG_STD_MAX)),
            action_limits,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.actor
            .layers
            .iter()
            .take(self.actor.layers.len() - 1)
            .map(|l| l.w.nrows())
            .collect()
    }

    /// Sample an action, its log-density, and the value estimate.
    pub fn act(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> Result<(Action, ActSample), RlError> {
        let mean = self.actor.forward_one(obs);
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(RlError::NonFiniteOutput);
        }
        let mut u = [0.0; 4];
        for (j, slot) in u.iter_mut().enumerate() {
            let sigma = self.log_std[j].clamp(LOG_STD_MIN, LOG_STD_MAX).exp();
            let z: f64 = rng.sample(StandardNormal);
            *slot = mean[j] + sigma * z;
        }
        let value = self.value(obs)?;
        let log_prob = self.log_prob_of(&mean, &u);
        Ok((
            self.squash(&u),
            ActSample { u, log_prob, value },
        ))
    }

    /// Deterministic (mean) action for evaluation.
    pub fn act_deterministic(&self, obs: &[f64]) -> Result<Action, RlError> {
        let mean = self.actor.forward_one(obs);
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(RlError::NonFiniteOutput);
        }
        let mut u = [0.0; 4];
        u.copy_from_slice(&mean);
        Ok(self.squash(&u))
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64, RlError> {
        let v = self.critic.forward_one(obs)[0];
        if !v.is_finite() {
            return Err(RlError::NonFiniteOutput);
        }
        Ok(v)
    }

    fn squash(&self, u: &[f64; 4]) -> Action {
        let mut a = [0.0; 4];
        for j in 0..4 {
            a[j] = u[j].tanh() * self.action_limits[j];
        }
        Action::from_vector(a)
    }

    /// Log-density of the squashed, scaled action corresponding to the
    /// pre-squash sample `u` under the Gaussian with the given means.
    pub fn log_prob_of(&self, mean: &[f64], u: &[f64; 4]) -> f64 {
        let mut lp = 0.0;
        for j in 0..4 {
            let log_std = self.log_std[j].clamp(LOG_STD_MIN, LOG_STD_MAX);
            let sigma = log_std.exp();
            let z = (u[j] - mean[j]) / sigma;
            lp += -0.5 * z * z - log_std - 0.5 * LOG_2PI;
            let t = u[j].tanh();
            lp -= (1.0 - t * t + SQUASH_EPS).ln();
            lp -= self.action_limits[j].ln();
        }
        lp
    }

    /// Batched log-densities for the update path. `means`: batch x act,
    /// `u`: batch x act.
    pub fn log_prob_batch(&self, means: &Array2<f64>, u: &Array2<f64>) -> Array1<f64> {
        let batch = means.nrows();
        let mut out = Array1::zeros(batch);
        for i in 0..batch {
            let mut row = [0.0; 4];
            for j in 0..4 {
                row[j] = u[[i, j]];
            }
            let mean: Vec<f64> = means.row(i).to_vec();
            out[i] = self.log_prob_of(&mean, &row);
        }
        out
    }

    /// Entropy of the base Gaussian (the conventional PPO bonus for
    /// squashed policies).
    pub fn entropy(&self) -> f64 {
        self.log_std
            .iter()
            .map(|ls| ls.clamp(LOG_STD_MIN, LOG_STD_MAX) + 0.5 * (LOG_2PI + 1.0))
            .sum()
    }

    pub fn clamp_log_std(&mut self) {
        self.log_std
            .mapv_inplace(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
    }
}
