//! The training loop: vectorized rollouts through the safety filter, PPO
//! updates, periodic checkpoints scored by a small evaluation, and the
//! best-checkpoint link.
//!
//! Run directory layout:
//!
//! ```text
//! <root>/<name>-seed<k>/
//!   resolved.toml           # the fully resolved spec
//!   metrics.csv             # one row per PPO update
//!   checkpoints/step_*.ckpt # + .json sidecars, every checkpoint_every
//!   trajectories/step_*.csv # one sample episode per checkpoint
//!   best.ckpt               # copy of the highest-scoring checkpoint
//!   eval.csv                # written by `pih eval` / ablation runs
//! ```
//!
//! A training run is single-threaded and fully deterministic: identical
//! spec and seed give byte-identical metrics CSVs.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::{Env, Observation, OBS_DIM};
use crate::geometry::Catalogue;
use crate::reward::reward;
use crate::rl::{
    ppo_update, write_checkpoint, CheckpointMeta, ObsNormalizer, PolicyParams, PpoOptimizer,
    TrajectoryBuffer,
};
use crate::MM_PER_M;

use super::eval::{episode_seed, evaluate_with_policy, DeterministicPolicy};
use super::logging::{MetricsRow, TrajectoryRow, TrajectoryWriter, METRICS_HEADER};
use super::rollout::FilterState;
use super::spec::{ExperimentSpec, HarnessError, RunPaths};

/// Result of one training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub best_checkpoint: PathBuf,
    /// Selection success rate of the best checkpoint.
    pub best_success: f64,
    pub best_mean_reward: f64,
    pub updates: usize,
    pub checkpoints: Vec<PathBuf>,
}

struct Worker {
    env: Env,
    /// Last observation (post-step), input to the next filter decision.
    obs: Observation,
    filter: FilterState,
    episode_reward: f64,
}

/// Train one seed of the spec. `resume` continues from the latest
/// checkpoint in the run directory if one exists (episodes restart, so a
/// resumed stream differs from an uninterrupted one).
pub fn train(
    spec: &ExperimentSpec,
    seed: u64,
    run_root: Option<&Path>,
    catalogue: &Catalogue,
    resume: bool,
) -> Result<TrainOutcome, HarnessError> {
    spec.validate()?;
    let paths = RunPaths::new(run_root, spec, seed);
    std::fs::create_dir_all(paths.checkpoints_dir())?;
    std::fs::create_dir_all(paths.trajectories_dir())?;
    std::fs::write(paths.resolved_config(), spec.to_toml_string()?)?;

    let env_config = spec.build_env_config(catalogue)?;
    let ppo = spec.ppo_resolved();
    let spec_hash = spec.spec_hash();
    let safety = spec.effective_safety();

    // Policy, optimizer, normalizer — optionally from the latest checkpoint.
    let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(seed, 0xC0FFEE));
    let mut global_step: u64 = 0;
    let (mut params, mut normalizer) = if resume {
        match latest_checkpoint(&paths)? {
            Some((path, step)) => {
                let (p, n, _) = crate::rl::read_checkpoint(&path)?;
                global_step = step;
                (p, n)
            }
            None => fresh_policy(&env_config.step_limits, &ppo, &mut rng),
        }
    } else {
        fresh_policy(&env_config.step_limits, &ppo, &mut rng)
    };
    let mut optim = PpoOptimizer::new(&params, ppo.learning_rate);

    // Workers: independent env instances with derived seeds.
    let mut workers: Vec<Worker> = (0..ppo.n_envs)
        .map(|e| -> Result<Worker, HarnessError> {
            let (env, obs, _) = Env::new(env_config.clone(), episode_seed(seed, 1000 + e as u64))?;
            Ok(Worker {
                env,
                obs,
                filter: FilterState::new(safety),
                episode_reward: 0.0,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut metrics = csv::Writer::from_path(paths.metrics())?;
    metrics.write_record(METRICS_HEADER)?;

    let mut buffer = TrajectoryBuffer::new(ppo.rollout_len, ppo.n_envs, OBS_DIM, 4);
    let mut update_index = 0usize;
    let mut next_checkpoint = (global_step / spec.checkpoint_every + 1) * spec.checkpoint_every;
    let mut best: Option<(f64, f64, PathBuf)> = None;
    let mut checkpoints = Vec::new();

    while global_step < ppo.total_steps {
        // Collect one rollout.
        buffer.clear();
        let mut finished_rewards: Vec<f64> = Vec::new();
        let mut finished_successes: Vec<f64> = Vec::new();
        for _t in 0..ppo.rollout_len {
            for w in workers.iter_mut() {
                let raw_vec = w.obs.to_vector();
                let norm_obs = normalizer.observe(&raw_vec);
                let (proposed, sample) = params.act(&norm_obs, &mut rng)?;
                let action = w.filter.apply(&spec.dsl, proposed, &w.obs)?;
                let (next_obs, _wrench, done, info) = w.env.step(action)?;
                let r = step_reward(&w.env, &info.p_h, spec);
                w.episode_reward += r;
                buffer.push(&norm_obs, sample.u, sample.log_prob, r, sample.value, done);
                if done {
                    finished_rewards.push(w.episode_reward);
                    finished_successes.push(if info.success { 1.0 } else { 0.0 });
                    w.episode_reward = 0.0;
                    let (obs, _) = w.env.reset();
                    w.obs = obs;
                    w.filter.reset();
                } else {
                    w.obs = next_obs;
                }
            }
        }
        global_step += (ppo.rollout_len * ppo.n_envs) as u64;

        // Bootstrap values for the states after the last stored step.
        let bootstrap: Vec<f64> = workers
            .iter()
            .map(|w| {
                let v = normalizer.normalize(&w.obs.to_vector());
                params.value(&v)
            })
            .collect::<Result<_, _>>()?;
        buffer.finish(&bootstrap, ppo.gamma, ppo.gae_lambda);
        let diag = ppo_update(&mut params, &buffer, &ppo, &mut optim, &mut rng)?;
        update_index += 1;

        let episodes = finished_rewards.len();
        let mean_ep = if episodes > 0 {
            finished_rewards.iter().sum::<f64>() / episodes as f64
        } else {
            f64::NAN
        };
        let sr = if episodes > 0 {
            finished_successes.iter().sum::<f64>() / episodes as f64
        } else {
            f64::NAN
        };
        metrics.write_record(
            MetricsRow {
                update: update_index,
                global_step,
                episodes,
                mean_episode_reward: mean_ep,
                success_rate: sr,
                policy_loss: diag.policy_loss,
                value_loss: diag.value_loss,
                entropy: diag.entropy,
                clip_fraction: diag.clip_fraction,
                approx_kl: diag.approx_kl,
            }
            .to_record(),
        )?;

        // Checkpoints on every crossed multiple of checkpoint_every.
        while global_step >= next_checkpoint && next_checkpoint <= ppo.total_steps {
            let path = paths.checkpoint(next_checkpoint);
            write_checkpoint(
                &path,
                &params,
                &normalizer,
                &CheckpointMeta {
                    step_count: next_checkpoint,
                    seed,
                    config_hash: spec_hash.clone(),
                    mask: spec.model,
                },
            )?;
            let score = score_checkpoint(spec, &env_config, &params, &normalizer, seed)?;
            log_sample_trajectory(
                spec,
                &env_config,
                &params,
                &normalizer,
                seed,
                &paths.trajectory(next_checkpoint),
            )?;
            let better = match &best {
                None => true,
                Some((s, r, _)) => score.0 > *s || (score.0 == *s && score.1 > *r),
            };
            if better {
                best = Some((score.0, score.1, path.clone()));
            }
            checkpoints.push(path);
            next_checkpoint += spec.checkpoint_every;
        }
    }
    metrics.flush()?;

    // Fall back to a final checkpoint if the cadence produced none.
    let (best_success, best_mean_reward, best_path) = match best {
        Some(b) => b,
        None => {
            let path = paths.checkpoint(global_step);
            write_checkpoint(
                &path,
                &params,
                &normalizer,
                &CheckpointMeta {
                    step_count: global_step,
                    seed,
                    config_hash: spec_hash.clone(),
                    mask: spec.model,
                },
            )?;
            checkpoints.push(path.clone());
            let score = score_checkpoint(spec, &env_config, &params, &normalizer, seed)?;
            (score.0, score.1, path)
        }
    };
    std::fs::copy(&best_path, paths.best_checkpoint())?;
    std::fs::copy(
        crate::rl::sidecar_path(&best_path),
        crate::rl::sidecar_path(&paths.best_checkpoint()),
    )?;

    Ok(TrainOutcome {
        run_dir: paths.dir.clone(),
        best_checkpoint: paths.best_checkpoint(),
        best_success,
        best_mean_reward,
        updates: update_index,
        checkpoints,
    })
}

fn fresh_policy(
    step_limits: &[f64; 4],
    ppo: &crate::rl::PpoConfig,
    rng: &mut ChaCha8Rng,
) -> (PolicyParams, ObsNormalizer) {
    let params = PolicyParams::new(
        OBS_DIM,
        4,
        &ppo.hidden,
        *step_limits,
        ppo.log_std_init,
        rng,
    );
    (params, ObsNormalizer::new(crate::env::ObservationMask::Vftm))
}

fn latest_checkpoint(paths: &RunPaths) -> Result<Option<(PathBuf, u64)>, HarnessError> {
    let dir = paths.checkpoints_dir();
    if !dir.exists() {
        return Ok(None);
    }
    let mut best: Option<(PathBuf, u64)> = None;
    for entry in std::fs::read_dir(&dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let Some(step) = name
            .strip_prefix("step_")
            .and_then(|s| s.strip_suffix(".ckpt"))
            .and_then(|s| s.parse::<u64>().ok())
        else {
            continue;
        };
        if best.as_ref().map_or(true, |(_, s)| step > *s) {
            best = Some((path, step));
        }
    }
    Ok(best)
}

/// Reward for the step just taken: the post-step EEF pose against the
/// true hole, converted to metres.
fn step_reward(env: &Env, p_h: &[f64; 3], spec: &ExperimentSpec) -> f64 {
    reward(
        [
            env.eef().p[0] / MM_PER_M,
            env.eef().p[1] / MM_PER_M,
            env.eef().p[2] / MM_PER_M,
        ],
        [p_h[0] / MM_PER_M, p_h[1] / MM_PER_M, p_h[2] / MM_PER_M],
        &spec.reward,
    )
}

/// Deterministic selection eval with a fixed seed base, identical across
/// checkpoints of the same run: (success rate, mean reward).
fn score_checkpoint(
    spec: &ExperimentSpec,
    env_config: &crate::env::EnvConfig,
    params: &PolicyParams,
    normalizer: &ObsNormalizer,
    seed: u64,
) -> Result<(f64, f64), HarnessError> {
    let mut policy = DeterministicPolicy {
        params: params.clone(),
        normalizer: normalizer.clone(),
    };
    let report = evaluate_with_policy(
        &mut policy,
        env_config,
        spec.effective_safety(),
        &spec.dsl,
        &spec.reward,
        spec.select_episodes,
        episode_seed(seed, 0x5E1EC7),
    )?;
    Ok((report.success_rate, report.mean_reward))
}

/// One deterministic sample episode written as a trajectory CSV.
fn log_sample_trajectory(
    spec: &ExperimentSpec,
    env_config: &crate::env::EnvConfig,
    params: &PolicyParams,
    normalizer: &ObsNormalizer,
    seed: u64,
    path: &Path,
) -> Result<(), HarnessError> {
    let (mut env, mut obs, _) =
        Env::new(env_config.clone(), episode_seed(seed, 0x7247EC7))?;
    let mut filter = FilterState::new(spec.effective_safety());
    let mut writer = TrajectoryWriter::create(path)?;
    let mut step = 0usize;
    loop {
        let v = normalizer.normalize(&obs.to_vector());
        let proposed = params.act_deterministic(&v)?;
        let action = filter.apply(&spec.dsl, proposed, &obs)?;
        let (next_obs, wrench, done, info) = env.step(action)?;
        let r = step_reward(&env, &info.p_h, spec);
        writer.write(&TrajectoryRow::new(
            step,
            action,
            &next_obs,
            &wrench,
            info.p_h,
            r,
            done,
            info.success,
            filter.log(),
        ))?;
        obs = next_obs;
        step += 1;
        if done {
            break;
        }
    }
    writer.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ObservationMask;
    use super::super::rollout::SafetyVariant;

    fn tiny_spec(name: &str) -> ExperimentSpec {
        let mut spec = ExperimentSpec::named(name, ObservationMask::Vftm, SafetyVariant::Dsl);
        spec.total_steps = 2_048;
        spec.checkpoint_every = 1_024;
        spec.select_episodes = 2;
        spec.ppo.rollout_len = 64;
        spec.ppo.n_envs = 4;
        spec.ppo.epochs = 2;
        spec.ppo.minibatch_size = 64;
        spec
    }

    #[test]
    fn checkpoint_cadence_and_best_link() {
        let root = std::env::temp_dir().join("pih-train-test-cadence");
        let _ = std::fs::remove_dir_all(&root);
        let spec = tiny_spec("cadence");
        let out = train(&spec, 1, Some(&root), &Catalogue::builtin(), false).unwrap();
        // floor(2048 / 1024) = 2 checkpoints plus the best link.
        assert_eq!(out.checkpoints.len(), 2);
        assert!(out.best_checkpoint.exists());
        assert!(crate::rl::sidecar_path(&out.best_checkpoint).exists());
        let paths = RunPaths::new(Some(&root), &spec, 1);
        assert!(paths.metrics().exists());
        assert!(paths.resolved_config().exists());
        // One sample trajectory per checkpoint.
        assert!(paths.trajectory(1024).exists());
        assert!(paths.trajectory(2048).exists());
    }

    #[test]
    fn identical_seeds_give_identical_metrics() {
        let root_a = std::env::temp_dir().join("pih-train-test-det-a");
        let root_b = std::env::temp_dir().join("pih-train-test-det-b");
        let _ = std::fs::remove_dir_all(&root_a);
        let _ = std::fs::remove_dir_all(&root_b);
        let spec = tiny_spec("det");
        train(&spec, 9, Some(&root_a), &Catalogue::builtin(), false).unwrap();
        train(&spec, 9, Some(&root_b), &Catalogue::builtin(), false).unwrap();
        let paths_a = RunPaths::new(Some(&root_a), &spec, 9);
        let paths_b = RunPaths::new(Some(&root_b), &spec, 9);
        let a = std::fs::read(paths_a.metrics()).unwrap();
        let b = std::fs::read(paths_b.metrics()).unwrap();
        assert_eq!(a, b, "metrics CSVs must be byte-identical");
    }

    #[test]
    fn resume_continues_from_latest() {
        let root = std::env::temp_dir().join("pih-train-test-resume");
        let _ = std::fs::remove_dir_all(&root);
        let mut spec = tiny_spec("resume");
        spec.total_steps = 1_024;
        train(&spec, 2, Some(&root), &Catalogue::builtin(), false).unwrap();
        spec.total_steps = 2_048;
        let out = train(&spec, 2, Some(&root), &Catalogue::builtin(), true).unwrap();
        // The resumed run produces the second checkpoint.
        assert!(out.checkpoints.iter().any(|p| p
            .file_name()
            .unwrap()
            .to_str()
            .unwrap()
            .contains("2048")));
    }
}
