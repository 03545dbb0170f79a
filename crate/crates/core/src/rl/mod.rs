//! From-scratch PPO-clip learner.
//!
//! An MLP actor-critic with a state-independent log-std head and
//! tanh-squashed Gaussian actions, GAE advantages, and the clipped
//! surrogate update with Adam. No autodiff framework: forward and
//! backward passes are written out by hand and validated against finite
//! differences.

mod buffer;
mod checkpoint;
mod gae;
mod mlp;
mod normalizer;
mod policy;
mod ppo;

pub use buffer::TrajectoryBuffer;
pub use checkpoint::{
    read_checkpoint, sidecar_path, write_checkpoint, CheckpointError, CheckpointMeta,
};
pub use gae::compute_gae;
pub use mlp::{Adam, AdamVec, Dense, DenseGrad, Mlp};
pub use normalizer::ObsNormalizer;
pub use policy::{ActSample, PolicyParams, RlError, LOG_STD_MAX, LOG_STD_MIN};
pub use ppo::{
    minibatch_gradients, ppo_update, MinibatchGrads, PpoConfig, PpoOptimizer, UpdateDiagnostics,
};
