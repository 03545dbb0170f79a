//! The quasi-static insertion environment.
//!
//! A peg is rigidly attached to a Cartesian end-effector that can
//! translate and rotate about the vertical axis. A plate at a fixed
//! height carries one hole whose position and yaw are randomized per
//! episode. Stepping integrates the (clamped) action, resolves the rigid
//! contact constraints, recomputes the simulated F/T reading, and reports
//! the masked observation.
//!
//! # Step sequence
//!
//! 1. clamp the action to the per-step limits;
//! 2. apply yaw, then the lateral displacement; if the peg sits below the
//!    surface, a side-wall clamp keeps its overlap with the hole wall at
//!    or below the lateral penetration cap;
//! 3. apply the vertical displacement, clamped by the workspace bounds
//!    and by the supporting surface: the plate when the peg's
//!    cross-section is not contained in the hole's, the hole floor when
//!    it has entered the cavity. Penetration into either support is
//!    capped at `max_penetration` (where the sensed force saturates);
//! 4. recompute the wrench, advance the step counter, evaluate the
//!    success predicate (`contained` and bottom at least `success_depth`
//!    below the surface) and the horizon.
//!
//! One instance owns its RNG and is single-threaded; run independent
//! instances for parallel rollouts. Identical `(config, seed, actions)`
//! reproduce identical trajectories bit for bit.

mod contact;
mod types;

pub use types::{
    Action, EefState, HoleTarget, Observation, ObservationMask, StepInfo, Wrench, OBS_DIM,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    self, penetration, CrossSection, PlacedSection, PlanarPose, Vec2,
};
use contact::{compute_wrench, ContactContext, ContactInputs};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("step() called on a finished episode; call reset()")]
    EpisodeFinished,
}

/// Full parameterization of the environment. Distances in mm.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Peg cross-section (local frame, centred).
    pub peg: CrossSection,
    /// Hole cross-section — the peg's section grown by the task clearance.
    pub hole: CrossSection,
    /// Plate surface height.
    pub hole_z: f64,
    /// Cavity depth below the surface.
    pub hole_depth: f64,
    /// Nominal hole centre (x, y).
    pub hole_center: [f64; 2],
    /// Half-extent of the uniform hole randomization around the centre.
    pub hole_range: [f64; 2],
    /// Half-range of the uniform hole yaw randomization, radians.
    pub hole_yaw_range: f64,
    /// Fixed EEF start position.
    pub start: [f64; 3],
    /// Fixed EEF start yaw.
    pub start_theta: f64,
    /// Gaussian noise on the observed hole position, mm.
    pub sigma_obs: f64,
    /// Sensor noise as a fraction of full scale per component.
    pub sigma_ft: f64,
    /// Contact stiffness, N/mm.
    pub k_n: f64,
    /// Coulomb friction coefficient.
    pub mu: f64,
    /// Sensor full scale `[Fx, Fy, Fz, tx, ty, tz]` (N, N mm).
    pub full_scale: [f64; 6],
    /// Per-step action limits `[|dx|, |dy|, |dz|, |dyaw|]` (mm, rad).
    pub step_limits: [f64; 4],
    /// Episode length cap.
    pub horizon: usize,
    /// Workspace height bounds for the EEF.
    pub z_bounds: [f64; 2],
    /// Vertical penetration cap into a support surface; the sensed force
    /// saturates at `k_n * max_penetration`.
    pub max_penetration: f64,
    /// Number of bottom-face contact sample points.
    pub contact_samples: usize,
    /// Peg bottom must sit this far below the surface (while contained)
    /// to count as inserted.
    pub success_depth: f64,
    pub mask: ObservationMask,
}

impl EnvConfig {
    /// Canonical defaults for a given peg/hole pair.
    pub fn new(peg: CrossSection, hole: CrossSection) -> Self {
        EnvConfig {
            peg,
            hole,
            hole_z: 0.0,
            hole_depth: 20.0,
            hole_center: [0.0, 0.0],
            hole_range: [15.0, 15.0],
            hole_yaw_range: std::f64::consts::PI,
            start: [0.0, 0.0, 6.0],
            start_theta: 0.0,
            sigma_obs: 1.0,
            sigma_ft: 0.01,
            k_n: 10.0,
            mu: 0.3,
            full_scale: [20.0, 20.0, 40.0, 500.0, 500.0, 500.0],
            step_limits: [2.0, 2.0, 2.0, 2.0_f64.to_radians()],
            horizon: 110,
            z_bounds: [-30.0, 50.0],
            max_penetration: 4.0,
            contact_samples: 32,
            success_depth: 2.5,
            mask: ObservationMask::Vftm,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: String| Err(EnvError::InvalidConfig(msg));
        if self.hole_depth < 10.0 {
            return bad(format!("hole_depth must be >= 10 mm, got {}", self.hole_depth));
        }
        if self.hole_range[0] < 0.0 || self.hole_range[1] < 0.0 {
            return bad("hole_range must be non-negative (empty domain)".into());
        }
        if self.hole_yaw_range < 0.0 || self.hole_yaw_range > std::f64::consts::PI {
            return bad("hole_yaw_range must lie in [0, pi]".into());
        }
        for (name, v) in [
            ("k_n", self.k_n),
            ("mu", self.mu),
            ("max_penetration", self.max_penetration),
            ("success_depth", self.success_depth),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.full_scale.iter().any(|f| *f <= 0.0) {
            return bad("full_scale components must be positive".into());
        }
        if self.step_limits.iter().any(|l| *l <= 0.0) {
            return bad("step_limits must be positive".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.contact_samples < 3 {
            return bad("contact_samples must be at least 3".into());
        }
        if self.peg.area() >= self.hole.area() {
            return bad("hole must be strictly larger than the peg".into());
        }
        if !(self.z_bounds[0] < self.z_bounds[1]) {
            return bad("z_bounds must be ordered".into());
        }
        Ok(())
    }

    /// Lateral overlap cap against the hole wall: where the lateral force
    /// saturates.
    fn lateral_cap(&self) -> f64 {
        self.full_scale[0] / self.k_n
    }

    /// Beyond this overlap the peg no longer counts as "in the cavity".
    fn wall_engagement(&self) -> f64 {
        2.0 * self.lateral_cap()
    }
}

/// One environment instance. Owns its RNG, hole, and step state.
pub struct Env {
    config: EnvConfig,
    rng: ChaCha8Rng,
    eef: EefState,
    hole: HoleTarget,
    hole_placed: PlacedSection,
    peg_samples_local: Vec<Vec2>,
    steps: usize,
    done: bool,
}

impl Env {
    /// Validate the config and produce a freshly reset environment.
    pub fn new(config: EnvConfig, seed: u64) -> Result<(Self, Observation, HoleTarget), EnvError> {
        config.validate()?;
        let peg_samples_local = geometry::bottom_face_contact_samples(
            &config.peg,
            PlanarPose::identity(),
            config.contact_samples,
        );
        let placeholder = PlacedSection::new(&config.hole, PlanarPose::identity());
        let mut env = Env {
            eef: EefState::new(config.start, config.start_theta),
            hole: HoleTarget {
                p: [0.0, 0.0, config.hole_z],
                yaw: 0.0,
                shape: config.hole.clone(),
                depth: config.hole_depth,
            },
            hole_placed: placeholder,
            peg_samples_local,
            steps: 0,
            done: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
            config,
        };
        let (obs, hole) = env.reset();
        Ok((env, obs, hole))
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn eef(&self) -> &EefState {
        &self.eef
    }

    pub fn hole(&self) -> &HoleTarget {
        &self.hole
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Start a new episode: EEF back to the fixed start pose, hole
    /// redrawn uniformly from the randomization domain.
    ///
    /// RNG draw order is fixed (hole x, hole y, hole yaw, then the
    /// per-observation noise), so equal seeds give equal episodes.
    pub fn reset(&mut self) -> (Observation, HoleTarget) {
        let c = &self.config;
        let x = if c.hole_range[0] > 0.0 {
            self.rng
                .random_range(c.hole_center[0] - c.hole_range[0]..=c.hole_center[0] + c.hole_range[0])
        } else {
            c.hole_center[0]
        };
        let y = if c.hole_range[1] > 0.0 {
            self.rng
                .random_range(c.hole_center[1] - c.hole_range[1]..=c.hole_center[1] + c.hole_range[1])
        } else {
            c.hole_center[1]
        };
        let yaw = if c.hole_yaw_range > 0.0 {
            self.rng.random_range(-c.hole_yaw_range..c.hole_yaw_range)
        } else {
            0.0
        };
        self.hole = HoleTarget {
            p: [x, y, c.hole_z],
            yaw,
            shape: c.hole.clone(),
            depth: c.hole_depth,
        };
        self.hole_placed = PlacedSection::new(&c.hole, PlanarPose::new(x, y, yaw));
        self.eef = EefState::new(c.start, c.start_theta);
        self.steps = 0;
        self.done = false;
        (self.observe(Wrench::ZERO), self.hole.clone())
    }

    fn peg_pose(&self) -> PlanarPose {
        PlanarPose::new(self.eef.p[0], self.eef.p[1], self.eef.theta_z)
    }

    fn peg_placed(&self) -> PlacedSection {
        PlacedSection::new(&self.config.peg, self.peg_pose())
    }

    /// True iff the peg is fully inside the hole and its bottom sits at
    /// least `success_depth` below the surface.
    pub fn success(&self) -> bool {
        self.eef.p[2] <= self.config.hole_z - self.config.success_depth
            && self.hole_placed.contains_section(&self.peg_placed())
    }

    /// Apply one (clamped) action.
    pub fn step(&mut self, action: Action) -> Result<(Observation, Wrench, bool, StepInfo), EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let c = self.config.clone();
        let a = action.clamped(c.step_limits);
        let z_prev = self.eef.p[2];
        let xy_prev = Vec2::new(self.eef.p[0], self.eef.p[1]);

        // Yaw, then lateral motion.
        self.eef.theta_z = geometry::normalize_yaw(self.eef.theta_z + a.delta_theta_z);
        self.eef.p[0] += a.delta[0];
        self.eef.p[1] += a.delta[1];

        // Side-wall clamp: while below the surface the cross-section may
        // only stick out of the hole by the lateral cap.
        if z_prev < c.hole_z {
            for _ in 0..3 {
                let Some(pen) = penetration(&self.hole_placed, &self.peg_placed()) else {
                    break;
                };
                if pen.depth <= c.lateral_cap() + geometry::EPS
                    || pen.depth > c.wall_engagement()
                {
                    break;
                }
                let back = pen.push * (pen.depth - c.lateral_cap());
                self.eef.p[0] += back.x;
                self.eef.p[1] += back.y;
            }
        }

        // Vertical motion against workspace bounds and the support floor.
        let mut z = (self.eef.p[2] + a.delta[2]).clamp(c.z_bounds[0], c.z_bounds[1]);
        let peg_now = self.peg_placed();
        let contained = self.hole_placed.contains_section(&peg_now);
        let wall_depth = penetration(&self.hole_placed, &peg_now).map_or(0.0, |p| p.depth);
        let in_cavity = z_prev < c.hole_z && (contained || wall_depth <= c.wall_engagement());
        let floor = if contained || in_cavity {
            c.hole_z - c.hole_depth - c.max_penetration
        } else {
            c.hole_z - c.max_penetration
        };
        if z < floor {
            z = floor;
        }
        self.eef.p[2] = z;

        // Sense, then bookkeeping.
        let lateral_velocity = Vec2::new(self.eef.p[0], self.eef.p[1]) - xy_prev;
        let wrench = self.sense(lateral_velocity);
        self.steps += 1;
        let success = self.success();
        self.done = success || self.steps >= c.horizon;
        let info = StepInfo {
            p_h: self.hole.p,
            hole_yaw: self.hole.yaw,
            contained,
            in_contact: wrench.raw().iter().any(|v| *v != 0.0),
            success,
        };
        Ok((self.observe(wrench), wrench, self.done, info))
    }

    fn sense(&mut self, lateral_velocity: Vec2) -> Wrench {
        let c = &self.config;
        let pose = self.peg_pose();
        let samples: Vec<Vec2> = self.peg_samples_local.iter().map(|p| pose.apply(*p)).collect();
        let peg = PlacedSection::new(&c.peg, pose);
        compute_wrench(
            &ContactContext {
                hole: &self.hole_placed,
                surface_z: c.hole_z,
                hole_depth: c.hole_depth,
                k_n: c.k_n,
                mu: c.mu,
                sigma_ft: c.sigma_ft,
                full_scale: c.full_scale,
                wall_engagement: c.wall_engagement(),
            },
            &ContactInputs {
                samples: &samples,
                peg: &peg,
                p_ee: Vec2::new(self.eef.p[0], self.eef.p[1]),
                z: self.eef.p[2],
                lateral_velocity,
            },
            &mut self.rng,
        )
    }

    /// Assemble the masked observation; draws the hole-position noise.
    fn observe(&mut self, wrench: Wrench) -> Observation {
        let c = &self.config;
        let mut noise = [0.0; 3];
        for slot in noise.iter_mut() {
            let z: f64 = self.rng.sample(StandardNormal);
            *slot = z * c.sigma_obs;
        }
        let p_h_obs = match c.mask {
            ObservationMask::Ftm => [0.0; 3],
            _ => [
                self.hole.p[0] + noise[0],
                self.hole.p[1] + noise[1],
                self.hole.p[2] + noise[2],
            ],
        };
        let wrench_norm = match c.mask {
            ObservationMask::Vm => [0.0; 6],
            _ => wrench.normalized,
        };
        Observation {
            p_ee: self.eef.p,
            wrench_norm,
            theta_z: self.eef.theta_z,
            p_h_obs,
            mask: c.mask,
        }
    }
}
