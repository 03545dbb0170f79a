//! The clipped-surrogate PPO update.
//!
//! Each update runs several epochs of shuffled minibatches over the
//! rollout buffer, ascending
//! `min(rho A, clip(rho, 1 - eps, 1 + eps) A)` minus the value loss and
//! plus the entropy bonus, with Adam on actor, critic, and log-std.
//! Gradients are analytic (the acceptance suite checks them against
//! central finite differences).

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::TrajectoryBuffer;
use super::mlp::{Adam, AdamVec, DenseGrad};
use super::policy::{PolicyParams, RlError, LOG_STD_MAX, LOG_STD_MIN};

/// PPO hyperparameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub total_steps: u64,
    /// Episode cap enforced by the environment.
    pub horizon: usize,
    /// Steps collected per environment per update.
    pub rollout_len: usize,
    pub n_envs: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub hidden: Vec<usize>,
    pub log_std_init: f64,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            total_steps: 2_000_000,
            horizon: 110,
            rollout_len: 256,
            n_envs: 8,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs: 10,
            minibatch_size: 64,
            learning_rate: 3e-4,
            entropy_coef: 0.0,
            value_coef: 0.5,
            hidden: vec![64, 64],
            log_std_init: -0.5,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.total_steps < (self.rollout_len * self.n_envs) as u64 {
            return Err("total_steps must cover at least one rollout".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("gamma must lie in (0,1], got {}", self.gamma));
        }
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return Err(format!("lambda must lie in (0,1], got {}", self.gae_lambda));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(format!("clip_eps must lie in (0,1), got {}", self.clip_eps));
        }
        if self.minibatch_size == 0 || self.epochs == 0 || self.n_envs == 0 {
            return Err("epochs, minibatch size and env count must be positive".into());
        }
        Ok(())
    }
}

/// Optimizer state for the three parameter groups.
pub struct PpoOptimizer {
    actor: Adam,
    critic: Adam,
    log_std: AdamVec,
}

impl PpoOptimizer {
    pub fn new(params: &PolicyParams, lr: f64) -> Self {
        PpoOptimizer {
            actor: Adam::new(lr, &params.actor),
            critic: Adam::new(lr, &params.critic),
            log_std: AdamVec::new(lr, params.log_std.len()),
        }
    }
}

/// Per-update training diagnostics.
#[derive(Clone, Copy, Debug, Default)]
pub struct UpdateDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Fraction of samples on the clipped branch.
    pub clip_fraction: f64,
    /// Mean `log_prob_old - log_prob_new` over the last epoch.
    pub approx_kl: f64,
}

/// Loss value and analytic gradients for one minibatch. Shared by the
/// update loop and the finite-difference tests.
pub struct MinibatchGrads {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub actor: Vec<DenseGrad>,
    pub critic: Vec<DenseGrad>,
    pub log_std: Array1<f64>,
}

/// Evaluate the clipped PPO loss and its gradients on one minibatch.
pub fn minibatch_gradients(
    params: &PolicyParams,
    obs: &Array2<f64>,
    u: &Array2<f64>,
    old_log_probs: &Array1<f64>,
    advantages: &Array1<f64>,
    returns: &Array1<f64>,
    config: &PpoConfig,
) -> MinibatchGrads {
    let batch = obs.nrows();
    let act_dim = params.act_dim();
    let bf = batch as f64;

    // Actor forward; gradient of the surrogate wrt the means.
    let cache = params.actor.forward(obs);
    let means = cache.output().clone();
    let new_log_probs = params.log_prob_batch(&means, u);

    let mut d_means = Array2::zeros((batch, act_dim));
    let mut d_log_std = Array1::zeros(act_dim);
    let mut policy_loss = 0.0;
    let mut clipped = 0usize;
    let mut kl = 0.0;
    for i in 0..batch {
        let adv = advantages[i];
        let rho = (new_log_probs[i] - old_log_probs[i]).exp();
        kl += old_log_probs[i] - new_log_probs[i];
        let s1 = rho * adv;
        let s2 = rho.clamp(1.0 - config.clip_eps, 1.0 + config.clip_eps) * adv;
        policy_loss -= s1.min(s2) / bf;
        let on_clip = s2 < s1;
        if on_clip {
            clipped += 1;
            continue; // clipped branch: zero gradient through rho
        }
        // d(-s1)/d logp = -adv * rho; chain into means and log-std.
        let d_logp = -adv * rho / bf;
        for j in 0..act_dim {
            let log_std = params.log_std[j].clamp(LOG_STD_MIN, LOG_STD_MAX);
            let sigma = log_std.exp();
            let z = (u[[i, j]] - means[[i, j]]) / sigma;
            // d logp / d mean_j = z / sigma;  d logp / d log_std_j = z^2 - 1.
            d_means[[i, j]] += d_logp * z / sigma;
            d_log_std[j] += d_logp * (z * z - 1.0);
        }
    }
    let actor_grads = params.actor.backward(&cache, &d_means);

    // Critic: squared error to returns.
    let vcache = params.critic.forward(obs);
    let v = vcache.output().index_axis(Axis(1), 0).to_owned();
    let mut value_loss = 0.0;
    let mut d_v = Array2::zeros((batch, 1));
    for i in 0..batch {
        let err = v[i] - returns[i];
        value_loss += err * err / bf;
        d_v[[i, 0]] = config.value_coef * 2.0 * err / bf;
    }
    let critic_grads = params.critic.backward(&vcache, &d_v);

    // Entropy bonus acts on the log-std head only.
    let entropy = params.entropy();
    for j in 0..act_dim {
        d_log_std[j] -= config.entropy_coef;
    }

    let loss = policy_loss + config.value_coef * value_loss - config.entropy_coef * entropy;
    MinibatchGrads {
        loss,
        policy_loss,
        value_loss,
        entropy,
        clip_fraction: clipped as f64 / bf,
        approx_kl: kl / bf,
        actor: actor_grads,
        critic: critic_grads,
        log_std: d_log_std,
    }
}

/// Run the epochs-over-minibatches update on a finished buffer.
pub fn ppo_update(
    params: &mut PolicyParams,
    buffer: &TrajectoryBuffer,
    config: &PpoConfig,
    optim: &mut PpoOptimizer,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateDiagnostics, RlError> {
    let n = buffer.capacity();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut diag = UpdateDiagnostics::default();
    let mut batches = 0.0;
    for _epoch in 0..config.epochs {
        indices.shuffle(rng);
        for (mb_index, chunk) in indices.chunks(config.minibatch_size).enumerate() {
            let obs = select_rows(&buffer.obs, chunk);
            let u = select_rows(&buffer.u, chunk);
            let old_lp = select(&buffer.log_probs, chunk);
            let adv = select(&buffer.advantages, chunk);
            let ret = select(&buffer.returns, chunk);
            let grads = minibatch_gradients(params, &obs, &u, &old_lp, &adv, &ret, config);
            let finite = grads
                .actor
                .iter()
                .chain(grads.critic.iter())
                .all(|g| g.w.iter().chain(g.b.iter()).all(|v| v.is_finite()))
                && grads.log_std.iter().all(|v| v.is_finite());
            if !finite {
                return Err(RlError::NonFiniteGradient { minibatch: mb_index });
            }
            optim.actor.step(&mut params.actor, &grads.actor);
            optim.critic.step(&mut params.critic, &grads.critic);
            optim.log_std.step(&mut params.log_std, &grads.log_std);
            params.clamp_log_std();

            diag.policy_loss += grads.policy_loss;
            diag.value_loss += grads.value_loss;
            diag.entropy += grads.entropy;
            diag.clip_fraction += grads.clip_fraction;
            diag.approx_kl += grads.approx_kl;
            batches += 1.0;
        }
    }
    diag.policy_loss /= batches;
    diag.value_loss /= batches;
    diag.entropy /= batches;
    diag.clip_fraction /= batches;
    diag.approx_kl /= batches;
    Ok(diag)
}

fn select_rows(src: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), src.ncols()));
    for (row, &i) in idx.iter().enumerate() {
        out.row_mut(row).assign(&src.row(i));
    }
    out
}

fn select(src: &Array1<f64>, idx: &[usize]) -> Array1<f64> {
    Array1::from_iter(idx.iter().map(|&i| src[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn toy_params(rng: &mut ChaCha8Rng) -> PolicyParams {
        PolicyParams::new(13, 4, &[4], [2.0, 2.0, 2.0, 0.035], -0.4, rng)
    }

    fn toy_batch(
        params: &PolicyParams,
        rng: &mut ChaCha8Rng,
        batch: usize,
    ) -> (Array2<f64>, Array2<f64>, Array1<f64>, Array1<f64>, Array1<f64>) {
        let obs = Array2::from_shape_fn((batch, 13), |_| rng.random_range(-1.0..1.0));
        let u = Array2::from_shape_fn((batch, 4), |_| rng.random_range(-1.5..1.5));
        let cache = params.actor.forward(&obs);
        let lp = params.log_prob_batch(&cache.output().clone(), &u);
        // Perturb the stored log-probs so ratios spread around 1.
        let old_lp = Array1::from_iter(lp.iter().map(|v| v + rng.random_range(-0.2..0.2)));
        let adv = Array1::from_shape_fn(batch, |_| rng.random_range(-2.0..2.0));
        let ret = Array1::from_shape_fn(batch, |_| rng.random_range(-1.0..1.0));
        (obs, u, old_lp, adv, ret)
    }

    #[test]
    fn fresh_buffer_surrogate_equals_mean_advantage() {
        // With old == new log-probs every ratio is exactly 1, so the
        // surrogate is the mean advantage and the policy loss its negation.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = toy_params(&mut rng);
        let (obs, u, _, adv, ret) = toy_batch(&params, &mut rng, 16);
        let cache = params.actor.forward(&obs);
        let lp = params.log_prob_batch(&cache.output().clone(), &u);
        let grads =
            minibatch_gradients(&params, &obs, &u, &lp, &adv, &ret, &PpoConfig::default());
        let mean_adv = adv.sum() / 16.0;
        assert!((grads.policy_loss + mean_adv).abs() < 1e-12);
        assert_eq!(grads.clip_fraction, 0.0);
    }

    #[test]
    fn clipped_branch_kills_the_gradient() {
        // One sample with A > 0 and rho far above 1 + eps: the clipped
        // branch is active and no gradient flows to the actor.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = toy_params(&mut rng);
        let obs = Array2::zeros((1, 13));
        let u = Array2::zeros((1, 4));
        let cache = params.actor.forward(&obs);
        let lp = params.log_prob_batch(&cache.output().clone(), &u);
        // old log-prob much smaller -> rho = exp(new - old) >> 1 + eps.
        let old_lp = Array1::from_vec(vec![lp[0] - 1.0]);
        let adv = Array1::from_vec(vec![1.5]);
        let ret = Array1::zeros(1);
        let grads =
            minibatch_gradients(&params, &obs, &u, &old_lp, &adv, &ret, &PpoConfig::default());
        assert_eq!(grads.clip_fraction, 1.0);
        for g in &grads.actor {
            assert!(g.w.iter().all(|v| *v == 0.0));
            assert!(g.b.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn surrogate_never_exceeds_clip_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = toy_params(&mut rng);
        let config = PpoConfig::default();
        let (obs, u, old_lp, adv, _) = toy_batch(&params, &mut rng, 64);
        let cache = params.actor.forward(&obs);
        let lp = params.log_prob_batch(&cache.output().clone(), &u);
        for i in 0..64 {
            let rho = (lp[i] - old_lp[i]).exp();
            let s = (rho * adv[i]).min(rho.clamp(0.8, 1.2) * adv[i]);
            let bound = ((1.0 + config.clip_eps) * adv[i]).max((1.0 - config.clip_eps) * adv[i]);
            assert!(s <= bound + 1e-12);
        }
    }

    #[test]
    fn full_loss_gradients_match_finite_differences() {
        // Central differences over every actor, critic, and log-std
        // parameter of a 13 -> 4 -> 4 toy net, 20 random samples.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = toy_params(&mut rng);
        let config = PpoConfig::default();
        let (obs, u, old_lp, adv, ret) = toy_batch(&params, &mut rng, 20);

        let loss_of = |p: &PolicyParams| {
            minibatch_gradients(p, &obs, &u, &old_lp, &adv, &ret, &config).loss
        };
        let grads = minibatch_gradients(&params, &obs, &u, &old_lp, &adv, &ret, &config);

        let h = 1e-5;
        // Flatten analytic grads in the same order as the parameter walk.
        let mut analytic: Vec<f64> = Vec::new();
        for g in &grads.actor {
            analytic.extend(g.w.iter());
            analytic.extend(g.b.iter());
        }
        for g in &grads.critic {
            analytic.extend(g.w.iter());
            analytic.extend(g.b.iter());
        }
        analytic.extend(grads.log_std.iter());

        let actor_n = params.actor.param_count();
        let critic_n = params.critic.param_count();
        let total = actor_n + critic_n + params.log_std.len();
        for i in 0..total {
            let backup;
            {
                let p = param_at(&mut params, i, actor_n, critic_n);
                backup = *p;
                *p = backup + h;
            }
            let up = loss_of(&params);
            {
                let p = param_at(&mut params, i, actor_n, critic_n);
                *p = backup - h;
            }
            let down = loss_of(&params);
            {
                let p = param_at(&mut params, i, actor_n, critic_n);
                *p = backup;
            }
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[i];
            let scale = a.abs().max(numeric.abs()).max(1e-6);
            assert!(
                (a - numeric).abs() / scale < 1e-4,
                "param {i}: analytic {a}, numeric {numeric}"
            );
        }
    }

    fn param_at<'a>(
        params: &'a mut PolicyParams,
        i: usize,
        actor_n: usize,
        critic_n: usize,
    ) -> &'a mut f64 {
        if i < actor_n {
            params.actor.params_mut().nth(i).unwrap()
        } else if i < actor_n + critic_n {
            params.critic.params_mut().nth(i - actor_n).unwrap()
        } else {
            params.log_std.iter_mut().nth(i - actor_n - critic_n).unwrap()
        }
    }

    #[test]
    fn update_runs_and_reports_diagnostics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut params = toy_params(&mut rng);
        let config = PpoConfig {
            rollout_len: 16,
            n_envs: 2,
            minibatch_size: 8,
            epochs: 2,
            ..PpoConfig::default()
        };
        let mut buf = TrajectoryBuffer::new(16, 2, 13, 4);
        let mut obs = vec![0.0; 13];
        for t in 0..16 {
            for _e in 0..2 {
                for o in obs.iter_mut() {
                    *o = rng.random_range(-1.0..1.0);
                }
                let (_, sample) = params.act(&obs, &mut rng).unwrap();
                buf.push(&obs, sample.u, sample.log_prob, rng.random_range(-1.0..1.0), sample.value, t == 15);
            }
        }
        buf.finish(&[0.0, 0.0], config.gamma, config.gae_lambda);
        let mut optim = PpoOptimizer::new(&params, config.learning_rate);
        let diag = ppo_update(&mut params, &buf, &config, &mut optim, &mut rng).unwrap();
        assert!(diag.value_loss >= 0.0);
        assert!(diag.entropy.is_finite());
    }

    #[test]
    fn non_finite_gradient_reports_minibatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = toy_params(&mut rng);
        params.critic.layers[0].w[[0, 0]] = f64::INFINITY;
        let config = PpoConfig {
            rollout_len: 4,
            n_envs: 1,
            minibatch_size: 4,
            epochs: 1,
            ..PpoConfig::default()
        };
        let mut buf = TrajectoryBuffer::new(4, 1, 13, 4);
        for t in 0..4 {
            buf.push(&vec![1.0; 13], [0.1; 4], -1.0, 0.0, 0.0, t == 3);
        }
        buf.finish(&[0.0], config.gamma, config.gae_lambda);
        let mut optim = PpoOptimizer::new(&params, config.learning_rate);
        let err = ppo_update(&mut params, &buf, &config, &mut optim, &mut rng).unwrap_err();
        assert!(matches!(err, RlError::NonFiniteGradient { minibatch: 0 }));
    }
}
