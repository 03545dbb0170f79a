//! Value types shared by the environment and everything above it.

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_yaw, CrossSection};

/// End-effector state: Cartesian position (mm) plus rotation about the
/// vertical axis. `p[2]` is the height of the peg's bottom face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EefState {
    pub p: [f64; 3],
    /// Radians, normalized to `(-pi, pi]`. Stands in for the last joint
    /// angle of the arm.
    pub theta_z: f64,
}

/// Simulated six-axis F/T reading: forces in newtons, torques in
/// newton-millimetres, plus the normalized form used by observations and
/// the safety filters.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Wrench {
    pub force: [f64; 3],
    pub torque: [f64; 3],
    /// `raw / full_scale` per component, clamped to `[-1, 1]`, ordered
    /// `[Fx, Fy, Fz, tx, ty, tz]`.
    pub normalized: [f64; 6],
}

impl Wrench {
    pub const ZERO: Wrench = Wrench {
        force: [0.0; 3],
        torque: [0.0; 3],
        normalized: [0.0; 6],
    };

    pub fn from_raw(force: [f64; 3], torque: [f64; 3], full_scale: [f64; 6]) -> Self {
        let raw = [force[0], force[1], force[2], torque[0], torque[1], torque[2]];
        let mut normalized = [0.0; 6];
        for i in 0..6 {
            normalized[i] = (raw[i] / full_scale[i]).clamp(-1.0, 1.0);
        }
        Wrench {
            force,
            torque,
            normalized,
        }
    }

    pub fn raw(&self) -> [f64; 6] {
        [
            self.force[0],
            self.force[1],
            self.force[2],
            self.torque[0],
            self.torque[1],
            self.torque[2],
        ]
    }
}

/// The randomized insertion target. `p[2]` is the plate surface height.
#[derive(Clone, Debug)]
pub struct HoleTarget {
    pub p: [f64; 3],
    pub yaw: f64,
    /// The hole's cross-section (the peg's section grown by the task
    /// clearance).
    pub shape: CrossSection,
    /// Cavity depth below the surface, mm.
    pub depth: f64,
}

/// Which sensor modalities the policy sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ObservationMask {
    /// Vision + F/T: everything visible.
    Vftm,
    /// F/T only: the hole position reads as zero.
    Ftm,
    /// Vision only: the wrench reads as zero.
    Vm,
}

impl ObservationMask {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObservationMask::Vftm => "VFTM",
            ObservationMask::Ftm => "FTM",
            ObservationMask::Vm => "VM",
        }
    }
}

impl std::str::FromStr for ObservationMask {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "VFTM" => Ok(ObservationMask::Vftm),
            "FTM" => Ok(ObservationMask::Ftm),
            "VM" => Ok(ObservationMask::Vm),
            other => Err(format!("unknown observation mask '{other}'")),
        }
    }
}

/// What the policy sees each step. Masked fields are stored as exact
/// zeros, so the vector form needs no further masking.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    /// EEF position, mm.
    pub p_ee: [f64; 3],
    /// Normalized wrench; all zeros under `Vm`.
    pub wrench_norm: [f64; 6],
    /// Last-joint angle, radians.
    pub theta_z: f64,
    /// Observed (noisy) hole position, mm; all zeros under `Ftm`.
    pub p_h_obs: [f64; 3],
    pub mask: ObservationMask,
}

/// Number of slots in the observation vector.
pub const OBS_DIM: usize = 13;

impl Observation {
    /// Fixed layout: `[p_ee(3), wrench(6), theta_z(1), p_h_obs(3)]`.
    pub fn to_vector(&self) -> [f64; OBS_DIM] {
        let mut v = [0.0; OBS_DIM];
        v[..3].copy_from_slice(&self.p_ee);
        v[3..9].copy_from_slice(&self.wrench_norm);
        v[9] = self.theta_z;
        v[10..].copy_from_slice(&self.p_h_obs);
        v
    }

    /// Indices of slots the mask forces to zero.
    pub fn masked_slots(mask: ObservationMask) -> &'static [usize] {
        match mask {
            ObservationMask::Vftm => &[],
            ObservationMask::Ftm => &[10, 11, 12],
            ObservationMask::Vm => &[3, 4, 5, 6, 7, 8],
        }
    }
}

/// Incremental EEF command: displacement in mm plus a yaw increment in
/// radians. Components are clamped to the per-step limits before the
/// environment applies them.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Action {
    pub delta: [f64; 3],
    pub delta_theta_z: f64,
}

impl Action {
    pub const DIM: usize = 4;

    pub fn zero() -> Self {
        Action::default()
    }

    pub fn from_vector(v: [f64; 4]) -> Self {
        Action {
            delta: [v[0], v[1], v[2]],
            delta_theta_z: v[3],
        }
    }

    pub fn to_vector(&self) -> [f64; 4] {
        [self.delta[0], self.delta[1], self.delta[2], self.delta_theta_z]
    }

    /// Clamp each component to the per-step limits
    /// `[|dx|, |dy|, |dz|, |dyaw|]`.
    pub fn clamped(&self, limits: [f64; 4]) -> Action {
        Action {
            delta: [
                self.delta[0].clamp(-limits[0], limits[0]),
                self.delta[1].clamp(-limits[1], limits[1]),
                self.delta[2].clamp(-limits[2], limits[2]),
            ],
            delta_theta_z: self.delta_theta_z.clamp(-limits[3], limits[3]),
        }
    }
}

/// Ground-truth extras returned by `step` for logging and oracles; never
/// shown to the policy.
#[derive(Clone, Copy, Debug)]
pub struct StepInfo {
    /// True hole position, mm.
    pub p_h: [f64; 3],
    /// True hole yaw, radians.
    pub hole_yaw: f64,
    /// Whether the peg cross-section is fully inside the hole's.
    pub contained: bool,
    /// Whether any contact force acted this step.
    pub in_contact: bool,
    /// Success predicate after this step.
    pub success: bool,
}

impl EefState {
    pub fn new(p: [f64; 3], theta_z: f64) -> Self {
        EefState {
            p,
            theta_z: normalize_yaw(theta_z),
        }
    }
}
