//! Experiment specification and config file handling.
//!
//! One TOML file describes one experiment: the sensor-modality model, the
//! safety variant, the task geometry (a catalogue shape plus either a
//! millimetre clearance or a target gap proportion), seeds, and optional
//! overrides for every environment / reward / safety / PPO parameter.
//!
//! ```toml
//! name = "vftm-dsl-4mm"
//! model = "VFTM"            # VFTM | FTM | VM
//! safety = "DSL"            # DSL | Sliding | None
//! shape = "tr"              # catalogue name
//! clearance_mm = 4.0        # or: gap_proportion = 0.3
//! seeds = [1, 2, 3]
//! eval_episodes = 500
//! checkpoint_every = 10000
//!
//! [env]                     # optional overrides, same names as the
//! sigma_obs = 1.0           # environment config fields
//!
//! [reward]
//! # alpha = [2.3, 2.3, 1.23, 2.0, 0.5]
//!
//! [dsl]
//! # beta2 = [0.0, 0.0, 0.0]
//!
//! [ppo]
//! total_steps = 500000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::{EnvConfig, EnvError, ObservationMask};
use crate::geometry::{
    clearance_for_proportion, gap_proportion, Catalogue, CatalogueError, CrossSection,
    GeometryError,
};
use crate::reward::RewardParams;
use crate::rl::{CheckpointError, PpoConfig, RlError};
use crate::safety::{DslParams, SafetyError};

use super::rollout::SafetyVariant;

/// Sensor-modality model; identical to the observation mask it induces.
pub type ModelVariant = ObservationMask;

/// Corner-arc resolution used when dilating catalogue shapes into holes.
pub const DILATION_SEGMENTS: usize = 64;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("config serialize error: {0}")]
    TomlSer(#[from] toml::ser::Error),
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Catalogue(#[from] CatalogueError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Safety(#[from] SafetyError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint incompatible with spec: {0}")]
    IncompatibleCheckpoint(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("trajectory schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("replay diverged at step {step}: {column} logged {logged} vs recomputed {recomputed}")]
    ReplayDivergence {
        step: usize,
        column: String,
        logged: String,
        recomputed: String,
    },
}

/// Optional per-field environment overrides (everything except the shapes
/// and the mask, which the spec derives).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvOverrides {
    pub hole_z: Option<f64>,
    pub hole_depth: Option<f64>,
    pub hole_center: Option<[f64; 2]>,
    pub hole_range: Option<[f64; 2]>,
    pub hole_yaw_range: Option<f64>,
    pub start: Option<[f64; 3]>,
    pub start_theta: Option<f64>,
    pub sigma_obs: Option<f64>,
    pub sigma_ft: Option<f64>,
    pub k_n: Option<f64>,
    pub mu: Option<f64>,
    pub full_scale: Option<[f64; 6]>,
    pub step_limits: Option<[f64; 4]>,
    pub horizon: Option<usize>,
    pub z_bounds: Option<[f64; 2]>,
    pub max_penetration: Option<f64>,
    pub contact_samples: Option<usize>,
    pub success_depth: Option<f64>,
}

impl EnvOverrides {
    pub fn apply(&self, config: &mut EnvConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        set!(
            hole_z,
            hole_depth,
            hole_center,
            hole_range,
            hole_yaw_range,
            start,
            start_theta,
            sigma_obs,
            sigma_ft,
            k_n,
            mu,
            full_scale,
            step_limits,
            horizon,
            z_bounds,
            max_penetration,
            contact_samples,
            success_depth
        );
    }
}

fn default_shape() -> String {
    "tr".to_string()
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_eval_episodes() -> usize {
    500
}

fn default_select_episodes() -> usize {
    32
}

fn default_checkpoint_every() -> u64 {
    10_000
}

fn default_total_steps() -> u64 {
    500_000
}

/// One experiment: model x safety x task geometry, plus overrides.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub model: ModelVariant,
    pub safety: SafetyVariant,
    #[serde(default = "default_shape")]
    pub shape: String,
    /// Uniform clearance between peg and hole, mm. Mutually exclusive
    /// with `gap_proportion`; 4 mm when neither is given.
    #[serde(default)]
    pub clearance_mm: Option<f64>,
    /// Target gap proportion; the clearance is solved from it.
    #[serde(default)]
    pub gap_proportion: Option<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    /// Episodes used to score checkpoints during training (the final
    /// report always uses `eval_episodes`).
    #[serde(default = "default_select_episodes")]
    pub select_episodes: usize,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: u64,
    /// Training budget; overrides `ppo.total_steps` when set here.
    #[serde(default = "default_total_steps")]
    pub total_steps: u64,
    #[serde(default)]
    pub env: EnvOverrides,
    #[serde(default)]
    pub reward: RewardParams,
    #[serde(default)]
    pub dsl: DslParams,
    #[serde(default)]
    pub ppo: PpoConfig,
}

impl ExperimentSpec {
    /// A minimal named spec with all defaults.
    pub fn named(name: &str, model: ModelVariant, safety: SafetyVariant) -> Self {
        ExperimentSpec {
            name: name.to_string(),
            model,
            safety,
            shape: default_shape(),
            clearance_mm: None,
            gap_proportion: None,
            seeds: default_seeds(),
            eval_episodes: default_eval_episodes(),
            select_episodes: default_select_episodes(),
            checkpoint_every: default_checkpoint_every(),
            total_steps: default_total_steps(),
            env: EnvOverrides::default(),
            reward: RewardParams::default(),
            dsl: DslParams::default(),
            ppo: PpoConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let spec: ExperimentSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String, HarnessError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidSpec(m));
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return bad(format!(
                "name '{}' must be non-empty and filesystem-safe",
                self.name
            ));
        }
        if self.eval_episodes < 1 {
            return bad("eval_episodes must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.clearance_mm.is_some() && self.gap_proportion.is_some() {
            return bad("give either clearance_mm or gap_proportion, not both".into());
        }
        if let Some(c) = self.clearance_mm {
            if !(c > 0.0) {
                return bad(format!("clearance_mm must be positive, got {c}"));
            }
        }
        if let Some(g) = self.gap_proportion {
            if !(g > 0.0 && g < 1.0) {
                return bad(format!("gap_proportion must lie in (0,1), got {g}"));
            }
        }
        // A vision-only policy cannot feed a force-based filter. The lock
        // may be paired with VM only in its disabled form (zero gains);
        // the filter is then skipped entirely.
        match (self.model, self.safety) {
            (ObservationMask::Vm, SafetyVariant::Dsl) => {
                if self.dsl.beta2 != [0.0; 3] {
                    return bad(
                        "VM x DSL requires beta2 = [0,0,0] (the disabled lock)".into(),
                    );
                }
            }
            (ObservationMask::Vm, SafetyVariant::Sliding) => {
                return bad("VM x Sliding is invalid: the sliding filter needs F/T feedback".into());
            }
            _ => {}
        }
        self.reward
            .validate()
            .map_err(HarnessError::InvalidSpec)?;
        self.dsl.validate().map_err(HarnessError::InvalidSpec)?;
        self.ppo.validate().map_err(HarnessError::InvalidSpec)?;
        Ok(())
    }

    /// The filter actually applied at rollout time: VM never runs one.
    pub fn effective_safety(&self) -> SafetyVariant {
        if self.model == ObservationMask::Vm {
            SafetyVariant::None
        } else {
            self.safety
        }
    }

    /// Clearance in mm, solving the gap-proportion form if used.
    pub fn resolve_clearance(&self, peg: &CrossSection) -> f64 {
        match (self.clearance_mm, self.gap_proportion) {
            (Some(c), _) => c,
            (None, Some(g)) => clearance_for_proportion(peg, g),
            (None, None) => 4.0,
        }
    }

    /// Resolve the task geometry and produce the environment config.
    pub fn build_env_config(&self, catalogue: &Catalogue) -> Result<EnvConfig, HarnessError> {
        let peg = catalogue
            .get(&self.shape)
            .ok_or_else(|| {
                HarnessError::InvalidSpec(format!("shape '{}' not in catalogue", self.shape))
            })?
            .clone();
        let clearance = self.resolve_clearance(&peg);
        let hole = peg.dilate(clearance, DILATION_SEGMENTS)?;
        let mut config = EnvConfig::new(peg, hole);
        config.horizon = self.ppo.horizon;
        self.env.apply(&mut config);
        config.mask = self.model;
        config.validate()?;
        Ok(config)
    }

    /// Gap proportion of the resolved geometry (for reporting).
    pub fn resolved_gap_proportion(&self, config: &EnvConfig) -> f64 {
        gap_proportion(&config.peg, &config.hole).unwrap_or(f64::NAN)
    }

    /// Stable 12-hex-digit identity of the resolved spec.
    pub fn spec_hash(&self) -> String {
        let text = self.to_toml_string().unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..6])
    }

    /// Training budget, preferring the top-level field.
    pub fn effective_total_steps(&self) -> u64 {
        self.total_steps
    }

    /// The PPO config with the spec-level budget folded in.
    pub fn ppo_resolved(&self) -> PpoConfig {
        let mut ppo = self.ppo.clone();
        ppo.total_steps = self.effective_total_steps();
        ppo
    }
}

/// Filesystem layout of one training run.
#[derive(Clone, Debug)]
pub struct RunPaths {
    pub dir: PathBuf,
}

/// Environment variable overriding the default run-directory root.
pub const RUN_ROOT_ENV: &str = "PIH_RUN_ROOT";

impl RunPaths {
    /// `<root>/<spec-name>-seed<seed>`, where `<root>` is the explicit
    /// argument, else `$PIH_RUN_ROOT`, else `./runs`.
    pub fn new(run_root: Option<&Path>, spec: &ExperimentSpec, seed: u64) -> Self {
        let root = run_root
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(RUN_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"));
        RunPaths {
            dir: root.join(format!("{}-seed{}", spec.name, seed)),
        }
    }

    pub fn resolved_config(&self) -> PathBuf {
        self.dir.join("resolved.toml")
    }

    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }

    pub fn checkpoints_dir(&self) -> PathBuf {
        self.dir.join("checkpoints")
    }

    pub fn checkpoint(&self, step: u64) -> PathBuf {
        self.checkpoints_dir().join(format!("step_{step:010}.ckpt"))
    }

    pub fn best_checkpoint(&self) -> PathBuf {
        self.dir.join("best.ckpt")
    }

    pub fn trajectories_dir(&self) -> PathBuf {
        self.dir.join("trajectories")
    }

    pub fn trajectory(&self, step: u64) -> PathBuf {
        self.trajectories_dir().join(format!("step_{step:010}.csv"))
    }

    pub fn eval_report(&self) -> PathBuf {
        self.dir.join("eval.csv")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_validate() {
        let spec = ExperimentSpec::from_toml_str(
            r#"
            name = "smoke"
            model = "VFTM"
            safety = "DSL"
            "#,
        )
        .unwrap();
        assert_eq!(spec.shape, "tr");
        assert_eq!(spec.eval_episodes, 500);
        assert_eq!(spec.checkpoint_every, 10_000);
        let cat = Catalogue::builtin();
        let config = spec.build_env_config(&cat).unwrap();
        assert_eq!(config.mask, ObservationMask::Vftm);
        assert_eq!(config.horizon, 110);
    }

    #[test]
    fn vm_with_active_dsl_is_rejected() {
        let err = ExperimentSpec::from_toml_str(
            r#"
            name = "bad"
            model = "VM"
            safety = "DSL"
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, HarnessError::InvalidSpec(_)));
        // Disabled gains make it legal, and the effective filter is none.
        let ok = ExperimentSpec::from_toml_str(
            r#"
            name = "okvm"
            model = "VM"
            safety = "DSL"
            [dsl]
            beta1 = [0.0, 0.0, 0.0]
            beta2 = [0.0, 0.0, 0.0]
            "#,
        )
        .unwrap();
        assert_eq!(ok.effective_safety(), SafetyVariant::None);
    }

    #[test]
    fn gap_proportion_drives_clearance() {
        let mut spec = ExperimentSpec::named("p", ObservationMask::Vftm, SafetyVariant::None);
        spec.gap_proportion = Some(0.263);
        let cat = Catalogue::builtin();
        let config = spec.build_env_config(&cat).unwrap();
        let g = spec.resolved_gap_proportion(&config);
        assert!((g - 0.263).abs() < 1e-3, "resolved proportion {g}");
    }

    #[test]
    fn clearance_and_proportion_are_exclusive() {
        let mut spec = ExperimentSpec::named("x", ObservationMask::Vftm, SafetyVariant::None);
        spec.clearance_mm = Some(4.0);
        spec.gap_proportion = Some(0.3);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_hash_is_stable_and_sensitive() {
        let a = ExperimentSpec::named("h", ObservationMask::Vftm, SafetyVariant::Dsl);
        let mut b = a.clone();
        assert_eq!(a.spec_hash(), b.spec_hash());
        b.clearance_mm = Some(1.0);
        assert_ne!(a.spec_hash(), b.spec_hash());
    }

    #[test]
    fn resolved_spec_roundtrips() {
        let spec = ExperimentSpec::named("rt", ObservationMask::Ftm, SafetyVariant::Sliding);
        let text = spec.to_toml_string().unwrap();
        let back = ExperimentSpec::from_toml_str(&text).unwrap();
        assert_eq!(spec.spec_hash(), back.spec_hash());
    }

    #[test]
    fn env_overrides_apply() {
        let spec = ExperimentSpec::from_toml_str(
            r#"
            name = "ov"
            model = "FTM"
            safety = "None"
            [env]
            sigma_obs = 0.0
            k_n = 25.0
            horizon = 55
            "#,
        )
        .unwrap();
        let config = spec.build_env_config(&Catalogue::builtin()).unwrap();
        assert_eq!(config.sigma_obs, 0.0);
        assert_eq!(config.k_n, 25.0);
        assert_eq!(config.horizon, 55);
    }
}
