//! The evaluation protocol.
//!
//! A checkpoint (or any [`Policy`]) is run for a fixed number of
//! independent episodes with deterministic actions and a freshly
//! randomized hole per episode; the report carries the mean and variance
//! of episode reward and of the success indicator, plus the peak
//! normalized vertical force seen (for the safety comparison).
//!
//! Episode seeds derive from the root seed, so a report is reproducible
//! bit for bit from `(checkpoint, spec, seed)`.

use std::path::Path;

use crate::env::{Action, Env, EnvConfig, Observation};
use crate::geometry::Catalogue;
use crate::reward::{reward, RewardParams};
use crate::rl::{read_checkpoint, ObsNormalizer, PolicyParams};
use crate::safety::DslParams;
use crate::MM_PER_M;

use super::rollout::{FilterState, SafetyVariant};
use super::spec::{ExperimentSpec, HarnessError};

/// Anything that can pick an action. Evaluation passes the environment
/// itself so scripted oracles can read ground truth; learned policies
/// ignore it.
pub trait Policy {
    fn act(&mut self, obs: &Observation, env: &Env) -> Action;
}

/// A checkpointed actor running deterministically (mean actions) with its
/// frozen observation normalizer.
pub struct DeterministicPolicy {
    pub params: PolicyParams,
    pub normalizer: ObsNormalizer,
}

impl Policy for DeterministicPolicy {
    fn act(&mut self, obs: &Observation, _env: &Env) -> Action {
        let v = self.normalizer.normalize(&obs.to_vector());
        self.params
            .act_deterministic(&v)
            .unwrap_or_else(|_| Action::zero())
    }
}

/// Evaluation summary over `episodes` independent episodes.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub episodes: usize,
    pub mean_reward: f64,
    /// Population variance of the per-episode reward.
    pub var_reward: f64,
    pub success_rate: f64,
    pub var_success: f64,
    /// Max over episodes of the peak normalized |F_z|.
    pub peak_fz_norm: f64,
    /// Max over episodes of the peak raw F_z, newtons.
    pub peak_fz_raw: f64,
    pub mean_episode_len: f64,
    pub spec_hash: String,
    pub checkpoint: String,
    pub seed: u64,
}

impl EvalReport {
    pub const CSV_HEADER: &'static [&'static str] = &[
        "spec_hash",
        "checkpoint",
        "seed",
        "episodes",
        "mean_reward",
        "var_reward",
        "success_rate",
        "var_success",
        "peak_fz_norm",
        "peak_fz_raw",
        "mean_episode_len",
    ];

    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.spec_hash.clone(),
            self.checkpoint.clone(),
            self.seed.to_string(),
            self.episodes.to_string(),
            format!("{}", self.mean_reward),
            format!("{}", self.var_reward),
            format!("{}", self.success_rate),
            format!("{}", self.var_success),
            format!("{}", self.peak_fz_norm),
            format!("{}", self.peak_fz_raw),
            format!("{}", self.mean_episode_len),
        ]
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(Self::CSV_HEADER)?;
        w.write_record(self.to_record())?;
        w.flush()?;
        Ok(())
    }
}

/// Stable per-episode seed derivation (splitmix64 over root and index).
pub fn episode_seed(root: u64, episode: u64) -> u64 {
    let mut z = root
        .wrapping_add(0x9E3779B97F4A7C15)
        .wrapping_add(episode.wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Run the protocol with an arbitrary policy.
pub fn evaluate_with_policy(
    policy: &mut dyn Policy,
    env_config: &EnvConfig,
    safety: SafetyVariant,
    dsl_params: &DslParams,
    reward_params: &RewardParams,
    episodes: usize,
    root_seed: u64,
) -> Result<EvalReport, HarnessError> {
    assert!(episodes >= 1);
    let mut rewards = Vec::with_capacity(episodes);
    let mut successes = Vec::with_capacity(episodes);
    let mut lens = Vec::with_capacity(episodes);
    let mut peak_fz_norm: f64 = 0.0;
    let mut peak_fz_raw: f64 = 0.0;
    for ep in 0..episodes {
        let seed = episode_seed(root_seed, ep as u64);
        let (mut env, mut obs, _) = Env::new(env_config.clone(), seed)?;
        let mut filter = FilterState::new(safety);
        let mut total = 0.0;
        let mut steps = 0usize;
        let success = loop {
            let proposed = policy.act(&obs, &env);
            let action = filter.apply(dsl_params, proposed, &obs)?;
            let (next_obs, wrench, done, info) = env.step(action)?;
            let r = reward(
                [
                    env.eef().p[0] / MM_PER_M,
                    env.eef().p[1] / MM_PER_M,
                    env.eef().p[2] / MM_PER_M,
                ],
                [
                    info.p_h[0] / MM_PER_M,
                    info.p_h[1] / MM_PER_M,
                    info.p_h[2] / MM_PER_M,
                ],
                reward_params,
            );
            total += r;
            steps += 1;
            peak_fz_norm = peak_fz_norm.max(wrench.normalized[2].abs());
            peak_fz_raw = peak_fz_raw.max(wrench.force[2].abs());
            obs = next_obs;
            if done {
                break info.success;
            }
        };
        rewards.push(total);
        successes.push(if success { 1.0 } else { 0.0 });
        lens.push(steps as f64);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    let mean_reward = mean(&rewards);
    let success_rate = mean(&successes);
    Ok(EvalReport {
        episodes,
        mean_reward,
        var_reward: var(&rewards, mean_reward),
        success_rate,
        var_success: var(&successes, success_rate),
        peak_fz_norm,
        peak_fz_raw,
        mean_episode_len: mean(&lens),
        spec_hash: String::new(),
        checkpoint: String::new(),
        seed: root_seed,
    })
}

/// Evaluate a checkpoint against a spec: load, check compatibility, run
/// the protocol with deterministic actions.
pub fn evaluate(
    checkpoint: &Path,
    spec: &ExperimentSpec,
    catalogue: &Catalogue,
    root_seed: u64,
) -> Result<EvalReport, HarnessError> {
    let (params, normalizer, meta) = read_checkpoint(checkpoint)?;
    if meta.mask != spec.model {
        return Err(HarnessError::IncompatibleCheckpoint(format!(
            "checkpoint was trained with mask {:?}, spec wants {:?}",
            meta.mask, spec.model
        )));
    }
    let env_config = spec.build_env_config(catalogue)?;
    if params.obs_dim() != crate::env::OBS_DIM {
        return Err(HarnessError::IncompatibleCheckpoint(format!(
            "checkpoint observation dim {}",
            params.obs_dim()
        )));
    }
    let mut policy = DeterministicPolicy { params, normalizer };
    let mut report = evaluate_with_policy(
        &mut policy,
        &env_config,
        spec.effective_safety(),
        &spec.dsl,
        &spec.reward,
        spec.eval_episodes,
        root_seed,
    )?;
    report.spec_hash = spec.spec_hash();
    report.checkpoint = checkpoint.display().to_string();
    Ok(report)
}
