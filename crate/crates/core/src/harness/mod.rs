//! Experiment orchestration: specs, training, evaluation, ablations,
//! trajectory logging and replay.

mod ablate;
mod eval;
mod logging;
mod replay;
mod rollout;
mod spec;
mod train;

pub use ablate::{load_matrix, run_ablation, AblationCell, AblationOutcome, AblationReport};
pub use eval::{
    episode_seed, evaluate, evaluate_with_policy, DeterministicPolicy, EvalReport, Policy,
};
pub use logging::{
    read_trajectory, MetricsRow, TrajectoryRow, TrajectoryWriter, METRICS_HEADER,
    TRAJECTORY_HEADER,
};
pub use replay::{replay, ReplayOutcome};
pub use rollout::{FilterLog, FilterState, SafetyVariant};
pub use spec::{
    EnvOverrides, ExperimentSpec, HarnessError, ModelVariant, RunPaths, DILATION_SEGMENTS,
    RUN_ROOT_ENV,
};
pub use train::{train, TrainOutcome};
