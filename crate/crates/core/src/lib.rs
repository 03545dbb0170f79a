//! Peg-in-hole insertion workbench.
//!
//! A self-contained quasi-static simulator for force-guided peg-in-hole
//! assembly, together with the pieces needed to train and evaluate
//! insertion policies on it:
//!
//! - [`geometry`]: planar cross-sections (convex polygons and circles) and
//!   the containment / penetration queries the contact model is built on.
//! - [`env`]: the Cartesian end-effector environment with a simulated
//!   six-axis F/T sensor, hole randomization, and observation masking.
//! - [`reward`]: the distance-based per-step reward with its insertion
//!   bonus terms.
//! - [`safety`]: the dynamic safety lock (a force-feedback filter that
//!   limits downward motion) and the surface-sliding baseline.
//! - [`rl`]: a from-scratch PPO-clip learner with an MLP actor-critic,
//!   tanh-squashed Gaussian policy, and GAE.
//! - [`harness`]: experiment orchestration — training with checkpoints,
//!   the evaluation protocol, ablation matrices, and trajectory replay.
//!
//! Distances are millimetres and torques newton-millimetres throughout the
//! geometry and environment layers. The reward and safety modules work in
//! metres (their published constants are metre-based); conversions happen
//! at the harness boundary and are marked where they occur.

pub mod env;
pub mod geometry;
pub mod harness;
pub mod reward;
pub mod rl;
pub mod safety;

pub use env::{Action, EefState, EnvConfig, HoleTarget, Observation, ObservationMask, Wrench};
pub use geometry::{CrossSection, PlanarPose};
pub use reward::RewardParams;
pub use rl::{PolicyParams, PpoConfig};
pub use safety::{DslParams, DslState};

/// Millimetres per metre; the single conversion constant between the
/// geometry/environment layer (mm) and the reward/safety layer (m).
pub const MM_PER_M: f64 = 1000.0;
