//! Safety-filter plumbing shared by training, evaluation, and replay.

use serde::{Deserialize, Serialize};

use crate::env::{Action, Observation};
use crate::safety::{
    dsl_filter, sliding_filter, DslParams, DslPhase, DslState, LimitBranch, SafetyError,
    SlidingState,
};

/// Which action filter runs between the policy and the environment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SafetyVariant {
    #[serde(rename = "DSL")]
    Dsl,
    Sliding,
    None,
}

impl SafetyVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            SafetyVariant::Dsl => "DSL",
            SafetyVariant::Sliding => "Sliding",
            SafetyVariant::None => "None",
        }
    }
}

/// Mutable filter state for one environment instance.
#[derive(Clone, Debug)]
pub enum FilterState {
    Dsl(DslState),
    Sliding(SlidingState),
    None,
}

/// Per-step filter log fields for the trajectory CSV.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FilterLog {
    /// "probing" / "limited" / "pinned" / "" (no filter).
    pub phase: String,
    /// Current limit (metres); NaN when none exists yet.
    pub z_c: f64,
    /// "ft" / "pos" / "" — branch of the last limit update.
    pub branch: String,
    /// Limit increments from the last update, metres.
    pub increments: [f64; 3],
}

impl FilterState {
    pub fn new(variant: SafetyVariant) -> Self {
        match variant {
            SafetyVariant::Dsl => FilterState::Dsl(DslState::new()),
            SafetyVariant::Sliding => FilterState::Sliding(SlidingState::default()),
            SafetyVariant::None => FilterState::None,
        }
    }

    pub fn reset(&mut self) {
        *self = match self {
            FilterState::Dsl(_) => FilterState::Dsl(DslState::new()),
            FilterState::Sliding(_) => FilterState::Sliding(SlidingState::default()),
            FilterState::None => FilterState::None,
        };
    }

    /// Filter one proposed action given the current observation.
    pub fn apply(
        &mut self,
        params: &DslParams,
        proposed: Action,
        obs: &Observation,
    ) -> Result<Action, SafetyError> {
        match self {
            FilterState::Dsl(state) => {
                let (action, next) = dsl_filter(state, params, proposed, obs)?;
                *state = next;
                Ok(action)
            }
            FilterState::Sliding(state) => {
                let (action, next) = sliding_filter(state, params, proposed, obs)?;
                *state = next;
                Ok(action)
            }
            FilterState::None => Ok(proposed),
        }
    }

    /// Current log fields (call after `apply`).
    pub fn log(&self) -> FilterLog {
        match self {
            FilterState::Dsl(state) => FilterLog {
                phase: match state.phase {
                    DslPhase::Probing => "probing".to_string(),
                    DslPhase::Limited => "limited".to_string(),
                },
                z_c: state.z_c.unwrap_or(f64::NAN),
                branch: match state.last_branch {
                    Some(LimitBranch::ForceTorque) => "ft".to_string(),
                    Some(LimitBranch::PositionChange) => "pos".to_string(),
                    None => String::new(),
                },
                increments: state.last_increments,
            },
            FilterState::Sliding(state) => FilterLog {
                phase: if state.pinned_z.is_some() {
                    "pinned".to_string()
                } else {
                    "probing".to_string()
                },
                z_c: state.pinned_z.unwrap_or(f64::NAN),
                branch: String::new(),
                increments: [0.0; 3],
            },
            FilterState::None => FilterLog {
                phase: String::new(),
                z_c: f64::NAN,
                branch: String::new(),
                increments: [0.0; 3],
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ObservationMask;

    #[test]
    fn none_filter_passes_through() {
        let mut f = FilterState::new(SafetyVariant::None);
        let a = Action::from_vector([1.0, -1.0, -2.0, 0.01]);
        let obs = Observation {
            p_ee: [0.0; 3],
            wrench_norm: [0.0; 6],
            theta_z: 0.0,
            p_h_obs: [0.0; 3],
            mask: ObservationMask::Vm,
        };
        let out = f.apply(&DslParams::default(), a, &obs).unwrap();
        assert_eq!(out, a);
        assert_eq!(f.log().phase, "");
    }

    #[test]
    fn reset_restores_fresh_state() {
        let mut f = FilterState::new(SafetyVariant::Sliding);
        if let FilterState::Sliding(s) = &mut f {
            s.pinned_z = Some(0.001);
        }
        f.reset();
        if let FilterState::Sliding(s) = &f {
            assert!(s.pinned_z.is_none());
        } else {
            panic!("variant changed");
        }
    }
}
