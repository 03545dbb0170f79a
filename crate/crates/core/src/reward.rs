//! Per-step reward.
//!
//! The reward is a weighted Euclidean distance between the end-effector
//! and the hole, an alignment bonus that fires inside a tight distance
//! ball, and an insertion-depth term that activates near the hole:
//!
//! ```text
//! r = sign * sqrt(a1 dx^2 + a2 dy^2 + a3 dz^2)
//!     + a4 * [d(p_ee, p_h) < delta1]
//!     + a5 * z_dist
//!
//! z_dist = (z_h - z_ee)  if d(p_ee, p_h) < delta2, else 0
//! ```
//!
//! Positions are in metres: the default thresholds (`delta1` = 1e-4,
//! `delta2` = 0.01) only make sense at metre scale, while the geometry
//! and environment layers work in millimetres. The harness owns the
//! conversion.
//!
//! The distance term is written with a positive square root, but a reward
//! that grows with distance is untrainable, so the default applies a
//! negative sign; the literal reading stays available through
//! [`DistanceSign::AsWritten`].
//!
//! All functions here are pure and stateless.

use serde::{Deserialize, Serialize};

/// Sign applied to the distance term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceSign {
    /// Distance penalizes (the trainable objective).
    #[default]
    Negative,
    /// The literal positive square root.
    AsWritten,
}

/// Weights and thresholds of the reward. Positions in metres.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    /// Per-axis distance weights and the two bonus weights `[a1..a5]`.
    pub alpha: [f64; 5],
    /// Activation radius of the alignment bonus, metres.
    pub delta1: f64,
    /// Activation radius of the insertion-depth term, metres.
    pub delta2: f64,
    pub distance_sign: DistanceSign,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            alpha: [2.30, 2.30, 1.23, 2.0, 0.5],
            delta1: 1e-4,
            delta2: 0.01,
            distance_sign: DistanceSign::Negative,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta1 > 0.0) {
            return Err(format!("delta1 must be positive, got {}", self.delta1));
        }
        if !(self.delta2 > self.delta1) {
            return Err(format!(
                "delta2 ({}) must exceed delta1 ({})",
                self.delta2, self.delta1
            ));
        }
        Ok(())
    }
}

fn euclid(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Insertion-depth term: `z_h - z_ee` when the EEF is within `delta2` of
/// the hole point, else 0. Positive when the EEF sits below the hole datum.
pub fn z_dist(p_ee: [f64; 3], p_h: [f64; 3], params: &RewardParams) -> f64 {
    if euclid(p_ee, p_h) < params.delta2 {
        p_h[2] - p_ee[2]
    } else {
        0.0
    }
}

/// The per-step reward. `p_ee` and `p_h` in metres.
pub fn reward(p_ee: [f64; 3], p_h: [f64; 3], params: &RewardParams) -> f64 {
    let [a1, a2, a3, a4, a5] = params.alpha;
    let dx = p_ee[0] - p_h[0];
    let dy = p_ee[1] - p_h[1];
    let dz = p_ee[2] - p_h[2];
    let dist_term = (a1 * dx * dx + a2 * dy * dy + a3 * dz * dz).sqrt();
    let sign = match params.distance_sign {
        DistanceSign::Negative => -1.0,
        DistanceSign::AsWritten => 1.0,
    };
    let near_bonus = if euclid(p_ee, p_h) < params.delta1 { a4 } else { 0.0 };
    sign * dist_term + near_bonus + a5 * z_dist(p_ee, p_h, params)
}
