//! Fixed CSV schemas: per-step trajectories and per-update training
//! metrics.
//!
//! Floats are written with Rust's shortest-round-trip formatting, so
//! parsing a logged value back yields the identical bits — replay
//! comparisons can demand exact equality. Fields that do not apply
//! (filter columns without a filter, `z_c` before first contact) are
//! empty strings.

use std::path::Path;

use crate::env::{Action, Observation, Wrench};

use super::rollout::FilterLog;
use super::spec::HarnessError;

/// Column order of a trajectory CSV.
pub const TRAJECTORY_HEADER: &[&str] = &[
    "step",
    "a_dx",
    "a_dy",
    "a_dz",
    "a_dyaw",
    "pee_x",
    "pee_y",
    "pee_z",
    "theta_z",
    "fraw_x",
    "fraw_y",
    "fraw_z",
    "traw_x",
    "traw_y",
    "traw_z",
    "fn_x",
    "fn_y",
    "fn_z",
    "tn_x",
    "tn_y",
    "tn_z",
    "ph_x",
    "ph_y",
    "ph_z",
    "phobs_x",
    "phobs_y",
    "phobs_z",
    "reward",
    "done",
    "success",
    "dsl_phase",
    "dsl_zc_m",
    "dsl_branch",
    "dsl_dx_m",
    "dsl_dy_m",
    "dsl_dz_m",
];

/// One logged environment step. `action` is the applied (filtered and
/// clamped) command; `obs` is the post-step observation; `p_h` the true
/// hole position.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub action: Action,
    pub p_ee: [f64; 3],
    pub theta_z: f64,
    pub wrench_raw: [f64; 6],
    pub wrench_norm: [f64; 6],
    pub p_h: [f64; 3],
    pub p_h_obs: [f64; 3],
    pub reward: f64,
    pub done: bool,
    pub success: bool,
    pub filter: FilterLog,
}

impl TrajectoryRow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        step: usize,
        action: Action,
        obs: &Observation,
        wrench: &Wrench,
        p_h: [f64; 3],
        reward: f64,
        done: bool,
        success: bool,
        filter: FilterLog,
    ) -> Self {
        TrajectoryRow {
            step,
            action,
            p_ee: obs.p_ee,
            theta_z: obs.theta_z,
            wrench_raw: wrench.raw(),
            wrench_norm: wrench.normalized,
            p_h,
            p_h_obs: obs.p_h_obs,
            reward,
            done,
            success,
            filter,
        }
    }

    fn to_record(&self) -> Vec<String> {
        let mut rec = Vec::with_capacity(TRAJECTORY_HEADER.len());
        rec.push(self.step.to_string());
        for v in self.action.to_vector() {
            rec.push(fmt(v));
        }
        for v in self.p_ee {
            rec.push(fmt(v));
        }
        rec.push(fmt(self.theta_z));
        for v in self.wrench_raw {
            rec.push(fmt(v));
        }
        for v in self.wrench_norm {
            rec.push(fmt(v));
        }
        for v in self.p_h {
            rec.push(fmt(v));
        }
        for v in self.p_h_obs {
            rec.push(fmt(v));
        }
        rec.push(fmt(self.reward));
        rec.push(self.done.to_string());
        rec.push(self.success.to_string());
        rec.push(self.filter.phase.clone());
        rec.push(fmt_opt(self.filter.z_c));
        rec.push(self.filter.branch.clone());
        for v in self.filter.increments {
            rec.push(fmt(v));
        }
        rec
    }

    pub fn from_record(step_index: usize, rec: &csv::StringRecord) -> Result<Self, HarnessError> {
        if rec.len() != TRAJECTORY_HEADER.len() {
            return Err(HarnessError::SchemaMismatch(format!(
                "row {step_index}: {} fields, expected {}",
                rec.len(),
                TRAJECTORY_HEADER.len()
            )));
        }
        let f = |i: usize| -> Result<f64, HarnessError> {
            rec[i].parse::<f64>().map_err(|_| {
                HarnessError::SchemaMismatch(format!(
                    "row {step_index}, column {}: '{}' is not a number",
                    TRAJECTORY_HEADER[i], &rec[i]
                ))
            })
        };
        let b = |i: usize| -> Result<bool, HarnessError> {
            rec[i].parse::<bool>().map_err(|_| {
                HarnessError::SchemaMismatch(format!(
                    "row {step_index}, column {}: '{}' is not a bool",
                    TRAJECTORY_HEADER[i], &rec[i]
                ))
            })
        };
        Ok(TrajectoryRow {
            step: rec[0].parse().map_err(|_| {
                HarnessError::SchemaMismatch(format!("row {step_index}: bad step index"))
            })?,
            action: Action::from_vector([f(1)?, f(2)?, f(3)?, f(4)?]),
            p_ee: [f(5)?, f(6)?, f(7)?],
            theta_z: f(8)?,
            wrench_raw: [f(9)?, f(10)?, f(11)?, f(12)?, f(13)?, f(14)?],
            wrench_norm: [f(15)?, f(16)?, f(17)?, f(18)?, f(19)?, f(20)?],
            p_h: [f(21)?, f(22)?, f(23)?],
            p_h_obs: [f(24)?, f(25)?, f(26)?],
            reward: f(27)?,
            done: b(28)?,
            success: b(29)?,
            filter: FilterLog {
                phase: rec[30].to_string(),
                z_c: if rec[31].is_empty() { f64::NAN } else { f(31)? },
                branch: rec[32].to_string(),
                increments: [f(33)?, f(34)?, f(35)?],
            },
        })
    }
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: f64) -> String {
    fmt(v)
}

/// Streaming trajectory writer.
pub struct TrajectoryWriter {
    inner: csv::Writer<std::fs::File>,
}

impl TrajectoryWriter {
    pub fn create(path: &Path) -> Result<Self, HarnessError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut inner = csv::Writer::from_path(path)?;
        inner.write_record(TRAJECTORY_HEADER)?;
        Ok(TrajectoryWriter { inner })
    }

    pub fn write(&mut self, row: &TrajectoryRow) -> Result<(), HarnessError> {
        self.inner.write_record(row.to_record())?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), HarnessError> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Read a full trajectory CSV, validating the header.
pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>, HarnessError> {
    let mut reader = csv::Reader::from_path(path)?;
    {
        let header = reader.headers()?;
        let got: Vec<&str> = header.iter().collect();
        if got != TRAJECTORY_HEADER {
            return Err(HarnessError::SchemaMismatch(format!(
                "unexpected header: {got:?}"
            )));
        }
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        rows.push(TrajectoryRow::from_record(i, &rec?)?);
    }
    Ok(rows)
}

/// Column order of the training metrics CSV.
pub const METRICS_HEADER: &[&str] = &[
    "update",
    "global_step",
    "episodes",
    "mean_episode_reward",
    "success_rate",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
    "approx_kl",
];

/// One training-metrics row (one PPO update).
#[derive(Clone, Debug)]
pub struct MetricsRow {
    pub update: usize,
    pub global_step: u64,
    /// Episodes finished during this rollout.
    pub episodes: usize,
    pub mean_episode_reward: f64,
    pub success_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

impl MetricsRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.update.to_string(),
            self.global_step.to_string(),
            self.episodes.to_string(),
            fmt(self.mean_episode_reward),
            fmt(self.success_rate),
            fmt(self.policy_loss),
            fmt(self.value_loss),
            fmt(self.entropy),
            fmt(self.clip_fraction),
            fmt(self.approx_kl),
        ]
    }
}
