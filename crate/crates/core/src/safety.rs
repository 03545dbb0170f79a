//! Dynamic safety lock and the sliding baseline.
//!
//! Both are filters that sit between the policy and the environment and
//! rewrite the vertical component of the proposed action based on F/T
//! feedback:
//!
//! - [`dsl_filter`]: while no contact is felt (normalized `F_z` below the
//!   contact threshold) it records the wrench and EEF position and adds a
//!   small downward probe to the proposed motion. On contact it computes a
//!   contact limit `z_c` from the last two records — a force/torque-driven
//!   raise when the wrench jumped past the per-component thresholds (an
//!   edge-contact signature), otherwise a raise proportional to the last
//!   position change — and from then on clamps commanded `z` to stay at or
//!   above `z_c`. Lifting clear re-arms probing, which is what produces
//!   the lock's repetitive pressing behaviour.
//! - [`sliding_filter`]: descends identically, but pins the commanded `z`
//!   to the first-contact height permanently: lateral and rotational
//!   motion pass through, and there is no re-probing and no limit update.
//!
//! This module computes in metres (its gains and thresholds are
//! metre-based); observations and actions arrive in millimetres and are
//! converted at the boundary. Filters are pure functions of
//! `(state, inputs)` — replaying a recorded input sequence reproduces the
//! identical `z_c` sequence.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, Observation, ObservationMask};
use crate::MM_PER_M;

#[derive(Debug, Error, PartialEq)]
pub enum SafetyError {
    /// The observation's wrench slots are masked out; the filter cannot
    /// see contact. Signals an invalid ablation pairing.
    #[error("wrench is masked (vision-only observation); the safety filter needs F/T feedback")]
    MissingWrench,
    /// `update_limit` needs at least two synchronized records.
    #[error("need at least two recorder entries, got {0}")]
    InsufficientHistory(usize),
}

/// Gains and thresholds of the dynamic safety lock. Lengths in metres,
/// wrench quantities normalized to full scale.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct DslParams {
    /// Gains on the normalized F/T deltas (edge-contact branch), metres
    /// per normalized unit.
    pub beta1: [f64; 3],
    /// Gains on the componentwise absolute position change (flat-contact
    /// branch).
    pub beta2: [f64; 3],
    /// Per-component thresholds on the normalized wrench change
    /// `[Fx, Fy, Fz, tx, ty, tz]` that select the edge-contact branch.
    pub delta_f: [f64; 6],
    /// Downward probe added to the proposed motion while exploring, metres.
    pub probe_increment: f64,
    /// Normalized `F_z` at or above which contact is declared.
    pub contact_threshold: f64,
    /// Normalized `F_z` below which a lifted EEF re-arms probing.
    pub release_threshold: f64,
    /// Height above `z_c` required (together with the release threshold)
    /// to re-arm probing, metres.
    pub hysteresis: f64,
    /// Recorder ring-buffer capacity. The limit update only reads the last
    /// two entries; the rest is kept for logging.
    pub history: usize,
}

impl Default for DslParams {
    fn default() -> Self {
        DslParams {
            beta1: [1e-3, 1e-3, 5e-4],
            beta2: [1e-7, 1e-7, 1e-3],
            delta_f: [0.15, 0.15, 0.45, 0.1, 0.1, 0.2],
            probe_increment: 5e-4,
            contact_threshold: 0.5,
            release_threshold: 0.25,
            hysteresis: 5e-4,
            history: 16,
        }
    }
}

impl DslParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.beta1.iter().chain(&self.beta2).any(|b| *b < 0.0) {
            return Err("gains must be non-negative".into());
        }
        if self.delta_f.iter().any(|d| *d <= 0.0) {
            return Err("delta_f thresholds must be positive".into());
        }
        if !(self.contact_threshold > 0.0 && self.contact_threshold < 1.0) {
            return Err(format!(
                "contact threshold must lie in (0,1), got {}",
                self.contact_threshold
            ));
        }
        if self.release_threshold >= self.contact_threshold {
            return Err("release threshold must sit below the contact threshold".into());
        }
        if self.history < 2 {
            return Err("recorder needs capacity for at least two entries".into());
        }
        Ok(())
    }

    /// The paper's ablation disables the lock by zeroing the
    /// position-change gains.
    pub fn is_disabled(&self) -> bool {
        self.beta2 == [0.0; 3] && self.beta1 == [0.0; 3]
    }
}

/// Which branch of the limit update fired last.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitBranch {
    /// Wrench change exceeded `delta_f`: limit raised from F/T deltas.
    ForceTorque,
    /// Limit raised from the last position change.
    PositionChange,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DslPhase {
    /// No contact: record and creep downward.
    Probing,
    /// Contact seen: commanded `z` clamped at `z_c`.
    Limited,
}

/// Recorder state of the lock. `r_f` and `r_p` are appended together and
/// stay index-synchronized.
#[derive(Clone, Debug)]
pub struct DslState {
    /// Normalized wrench records, most recent last.
    pub r_f: VecDeque<[f64; 6]>,
    /// EEF positions in metres, most recent last.
    pub r_p: VecDeque<[f64; 3]>,
    /// Current contact limit, metres. Finite whenever `phase` is `Limited`.
    pub z_c: Option<f64>,
    pub phase: DslPhase,
    /// Logging fields describing the most recent limit update.
    pub last_branch: Option<LimitBranch>,
    pub last_increments: [f64; 3],
    /// Scalar magnitude of the last position change, for logging.
    pub last_position_change: f64,
}

impl Default for DslState {
    fn default() -> Self {
        Self::new()
    }
}

impl DslState {
    pub fn new() -> Self {
        DslState {
            r_f: VecDeque::new(),
            r_p: VecDeque::new(),
            z_c: None,
            phase: DslPhase::Probing,
            last_branch: None,
            last_increments: [0.0; 3],
            last_position_change: 0.0,
        }
    }

    fn record(&mut self, wrench: [f64; 6], p_m: [f64; 3], capacity: usize) {
        self.r_f.push_back(wrench);
        self.r_p.push_back(p_m);
        while self.r_f.len() > capacity {
            self.r_f.pop_front();
            self.r_p.pop_front();
        }
    }
}

/// Compute the contact limit `z_c` from the last two recorder entries.
///
/// If any component of the wrench change exceeds its `delta_f` threshold
/// the edge-contact branch converts the F/T deltas into position
/// increments (`beta1 . (dF + dtau)` per axis) and adds them to the
/// recorded height. Otherwise the raise is `beta2` dotted with the
/// componentwise absolute position change.
pub fn update_limit(state: &DslState, params: &DslParams) -> Result<LimitUpdate, SafetyError> {
    let n = state.r_f.len();
    if n < 2 {
        return Err(SafetyError::InsufficientHistory(n));
    }
    let f_now = state.r_f[n - 1];
    let f_prev = state.r_f[n - 2];
    let p_now = state.r_p[n - 1];
    let p_prev = state.r_p[n - 2];
    let mut df = [0.0; 6];
    for i in 0..6 {
        df[i] = f_now[i] - f_prev[i];
    }
    let z_ee = p_now[2];
    let edge = (0..6).any(|i| df[i] > params.delta_f[i]);
    let dp_abs = [
        (p_now[0] - p_prev[0]).abs(),
        (p_now[1] - p_prev[1]).abs(),
        (p_now[2] - p_prev[2]).abs(),
    ];
    let dp_norm = (dp_abs[0] * dp_abs[0] + dp_abs[1] * dp_abs[1] + dp_abs[2] * dp_abs[2]).sqrt();
    if edge {
        let inc = [
            params.beta1[0] * (df[0] + df[3]),
            params.beta1[1] * (df[1] + df[4]),
            params.beta1[2] * (df[2] + df[5]),
        ];
        Ok(LimitUpdate {
            z_c: z_ee + inc[0] + inc[1] + inc[2],
            branch: LimitBranch::ForceTorque,
            increments: inc,
            position_change: dp_norm,
        })
    } else {
        let inc = [
            params.beta2[0] * dp_abs[0],
            params.beta2[1] * dp_abs[1],
            params.beta2[2] * dp_abs[2],
        ];
        Ok(LimitUpdate {
            z_c: z_ee + inc[0] + inc[1] + inc[2],
            branch: LimitBranch::PositionChange,
            increments: inc,
            position_change: dp_norm,
        })
    }
}

/// Result of a limit update: the new `z_c` plus logging detail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitUpdate {
    pub z_c: f64,
    pub branch: LimitBranch,
    pub increments: [f64; 3],
    pub position_change: f64,
}

fn require_wrench(obs: &Observation) -> Result<(), SafetyError> {
    if obs.mask == ObservationMask::Vm {
        return Err(SafetyError::MissingWrench);
    }
    Ok(())
}

/// One control cycle of the dynamic safety lock. Lateral and rotational
/// components always pass through unchanged.
pub fn dsl_filter(
    state: &DslState,
    params: &DslParams,
    proposed: Action,
    obs: &Observation,
) -> Result<(Action, DslState), SafetyError> {
    require_wrench(obs)?;
    let fz = obs.wrench_norm[2];
    let p_m = [
        obs.p_ee[0] / MM_PER_M,
        obs.p_ee[1] / MM_PER_M,
        obs.p_ee[2] / MM_PER_M,
    ];
    let z_m = p_m[2];
    let mut next = state.clone();
    let mut action = proposed;

    let probing_now = match state.phase {
        DslPhase::Probing => true,
        DslPhase::Limited => {
            let z_c = state.z_c.expect("limited phase carries a limit");
            fz < params.release_threshold && z_m >= z_c + params.hysteresis
        }
    };

    if probing_now {
        if fz < params.contact_threshold {
            // Still exploring: record and creep down.
            next.phase = DslPhase::Probing;
            next.record(obs.wrench_norm, p_m, params.history);
            action.delta[2] = proposed.delta[2] - params.probe_increment * MM_PER_M;
        } else {
            // Contact: record the contact sample, then derive the limit
            // from the last two records.
            next.record(obs.wrench_norm, p_m, params.history);
            let z_c = match update_limit(&next, params) {
                Ok(update) => {
                    next.last_branch = Some(update.branch);
                    next.last_increments = update.increments;
                    next.last_position_change = update.position_change;
                    update.z_c
                }
                // Contact on the very first cycle: no history to compare,
                // fall back to the touch height itself.
                Err(SafetyError::InsufficientHistory(_)) => z_m,
                Err(e) => return Err(e),
            };
            next.z_c = Some(z_c);
            next.phase = DslPhase::Limited;
            action.delta[2] = clamp_to_limit(proposed.delta[2], z_m, z_c);
        }
    } else {
        // Limited: hold the commanded height at or above the lock.
        let z_c = state.z_c.expect("limited phase carries a limit");
        action.delta[2] = clamp_to_limit(proposed.delta[2], z_m, z_c);
    }
    Ok((action, next))
}

/// Clamp a proposed vertical increment (mm) so the commanded height never
/// drops below `z_c` (both heights in metres).
fn clamp_to_limit(dz_mm: f64, z_m: f64, z_c: f64) -> f64 {
    dz_mm.max((z_c - z_m) * MM_PER_M)
}

/// State of the sliding baseline: just the pinned height, once contacted.
#[derive(Clone, Copy, Debug, Default)]
pub struct SlidingState {
    /// First-contact height, metres.
    pub pinned_z: Option<f64>,
}

/// The sliding baseline: descend until first contact, then pin the
/// commanded height there for the rest of the episode. No re-probing, no
/// limit updates; lateral and rotational motion pass through.
pub fn sliding_filter(
    state: &SlidingState,
    params: &DslParams,
    proposed: Action,
    obs: &Observation,
) -> Result<(Action, SlidingState), SafetyError> {
    require_wrench(obs)?;
    let fz = obs.wrench_norm[2];
    let z_m = obs.p_ee[2] / MM_PER_M;
    let mut next = *state;
    let mut action = proposed;
    match state.pinned_z {
        Some(pin) => {
            action.delta[2] = (pin - z_m) * MM_PER_M;
        }
        None => {
            if fz >= params.contact_threshold {
                next.pinned_z = Some(z_m);
                action.delta[2] = 0.0;
            } else {
                action.delta[2] = proposed.delta[2] - params.probe_increment * MM_PER_M;
            }
        }
    }
    Ok((action, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn obs(fz: f64, z_mm: f64) -> Observation {
        obs_full([0.0, 0.0, fz, 0.0, 0.0, 0.0], z_mm)
    }

    fn obs_full(wrench: [f64; 6], z_mm: f64) -> Observation {
        Observation {
            p_ee: [0.0, 0.0, z_mm],
            wrench_norm: wrench,
            theta_z: 0.0,
            p_h_obs: [0.0, 0.0, 0.0],
            mask: ObservationMask::Vftm,
        }
    }

    fn act(dz_mm: f64) -> Action {
        Action {
            delta: [0.4, -0.3, dz_mm],
            delta_theta_z: 0.01,
        }
    }

    #[test]
    fn probing_adds_the_probe_and_records() {
        let params = DslParams::default();
        let state = DslState::new();
        let (action, next) = dsl_filter(&state, &params, act(-1.0), &obs(0.0, 6.0)).unwrap();
        assert_relative_eq!(action.delta[2], -1.0 - 0.5, epsilon = 1e-12);
        // Lateral and yaw untouched.
        assert_eq!(action.delta[0], 0.4);
        assert_eq!(action.delta[1], -0.3);
        assert_eq!(action.delta_theta_z, 0.01);
        assert_eq!(next.r_f.len(), 1);
        assert_eq!(next.r_p.len(), 1);
        assert_eq!(next.phase, DslPhase::Probing);
    }

    #[test]
    fn contact_clamps_at_the_limit() {
        let params = DslParams::default();
        let mut state = DslState::new();
        // One prior probing record at the same height and zero wrench.
        let (_, s1) = dsl_filter(&state, &params, act(0.0), &obs(0.0, 0.0)).unwrap();
        state = s1;
        // Contact at F_z = 0.6; wrench jump 0.6 > delta_f_z = 0.45 picks
        // the F/T branch: raise = beta1_z * 0.6 = 3e-4 m.
        let (action, next) = dsl_filter(&state, &params, act(-1.0), &obs(0.6, 0.0)).unwrap();
        assert_eq!(next.phase, DslPhase::Limited);
        let z_c = next.z_c.unwrap();
        assert_relative_eq!(z_c, 5e-4 * 0.6, epsilon = 1e-15);
        assert_eq!(next.last_branch, Some(LimitBranch::ForceTorque));
        // Proposed -1 mm clamped up to reach z_c instead.
        assert_relative_eq!(action.delta[2], z_c * MM_PER_M, epsilon = 1e-12);
    }

    #[test]
    fn update_limit_zero_deltas_keeps_touch_height() {
        let params = DslParams::default();
        let mut state = DslState::new();
        state.record([0.0; 6], [0.0, 0.0, 0.002], params.history);
        state.record([0.0; 6], [0.0, 0.0, 0.002], params.history);
        let update = update_limit(&state, &params).unwrap();
        assert_eq!(update.branch, LimitBranch::PositionChange);
        assert_relative_eq!(update.z_c, 0.002, epsilon = 1e-15);
    }

    #[test]
    fn update_limit_edge_branch_value() {
        // dF_x = 0.2, dtau_x = 0.1, rest 0: dx = 1e-3 * 0.3 = 3e-4.
        let params = DslParams::default();
        let mut state = DslState::new();
        state.record([0.0; 6], [0.0, 0.0, 0.01], params.history);
        state.record([0.2, 0.0, 0.0, 0.1, 0.0, 0.0], [0.0, 0.0, 0.01], params.history);
        let update = update_limit(&state, &params).unwrap();
        assert_eq!(update.branch, LimitBranch::ForceTorque);
        assert_relative_eq!(update.z_c, 0.01 + 3e-4, epsilon = 1e-15);
        assert_relative_eq!(update.increments[0], 3e-4, epsilon = 1e-15);
    }

    #[test]
    fn update_limit_position_branch_value() {
        // Displacement (0, 0, 1e-3 m): raise = beta2_z * 1e-3 = 1e-6.
        let params = DslParams::default();
        let mut state = DslState::new();
        state.record([0.0; 6], [0.0, 0.0, 0.003], params.history);
        state.record([0.1, 0.0, 0.2, 0.0, 0.0, 0.0], [0.0, 0.0, 0.002], params.history);
        let update = update_limit(&state, &params).unwrap();
        assert_eq!(update.branch, LimitBranch::PositionChange);
        assert_relative_eq!(update.z_c, 0.002 + 1e-6, epsilon = 1e-15);
        assert_relative_eq!(update.position_change, 1e-3, epsilon = 1e-15);
    }

    #[test]
    fn update_limit_needs_two_records() {
        let params = DslParams::default();
        let mut state = DslState::new();
        assert_eq!(
            update_limit(&state, &params),
            Err(SafetyError::InsufficientHistory(0))
        );
        state.record([0.0; 6], [0.0; 3], params.history);
        assert_eq!(
            update_limit(&state, &params),
            Err(SafetyError::InsufficientHistory(1))
        );
    }

    #[test]
    fn vm_mask_is_rejected() {
        let params = DslParams::default();
        let mut o = obs(0.0, 5.0);
        o.mask = ObservationMask::Vm;
        assert_eq!(
            dsl_filter(&DslState::new(), &params, act(0.0), &o).unwrap_err(),
            SafetyError::MissingWrench
        );
        assert_eq!(
            sliding_filter(&SlidingState::default(), &params, act(0.0), &o).unwrap_err(),
            SafetyError::MissingWrench
        );
    }

    #[test]
    fn reprobe_needs_release_and_clearance() {
        let params = DslParams::default();
        let mut state = DslState::new();
        state.phase = DslPhase::Limited;
        state.z_c = Some(0.001);
        // Force still high: stays limited.
        let (_, s) = dsl_filter(&state, &params, act(-1.0), &obs(0.4, 1.0)).unwrap();
        assert_eq!(s.phase, DslPhase::Limited);
        // Force released but still at the limit height: stays limited.
        let (_, s) = dsl_filter(&state, &params, act(-1.0), &obs(0.0, 1.0)).unwrap();
        assert_eq!(s.phase, DslPhase::Limited);
        // Released and lifted past the hysteresis margin: probes again.
        let (action, s) = dsl_filter(&state, &params, act(-1.0), &obs(0.0, 1.6)).unwrap();
        assert_eq!(s.phase, DslPhase::Probing);
        assert_relative_eq!(action.delta[2], -1.5, epsilon = 1e-12);
    }

    #[test]
    fn limited_phase_never_commands_below_zc() {
        let params = DslParams::default();
        let mut state = DslState::new();
        state.phase = DslPhase::Limited;
        state.z_c = Some(0.002);
        // 1 mm above the limit, proposing -3 mm: clamped to land on z_c.
        let (action, _) = dsl_filter(&state, &params, act(-3.0), &obs(0.6, 3.0)).unwrap();
        assert_relative_eq!(action.delta[2], -1.0, epsilon = 1e-12);
        // Proposals above the limit pass through.
        let (action, _) = dsl_filter(&state, &params, act(0.7), &obs(0.6, 3.0)).unwrap();
        assert_relative_eq!(action.delta[2], 0.7, epsilon = 1e-12);
    }

    #[test]
    fn sliding_pins_first_contact_forever() {
        let params = DslParams::default();
        let state = SlidingState::default();
        // Pre-contact: probe like the lock.
        let (action, s) = sliding_filter(&state, &params, act(-1.0), &obs(0.1, 4.0)).unwrap();
        assert_relative_eq!(action.delta[2], -1.5, epsilon = 1e-12);
        assert!(s.pinned_z.is_none());
        // Contact: hold height.
        let (action, s) = sliding_filter(&s, &params, act(-1.0), &obs(0.7, 2.0)).unwrap();
        assert_relative_eq!(action.delta[2], 0.0, epsilon = 1e-12);
        assert_relative_eq!(s.pinned_z.unwrap(), 0.002, epsilon = 1e-15);
        // Later cycles drive back to the pin regardless of the proposal,
        // while lateral motion passes through.
        let (action, s2) = sliding_filter(&s, &params, act(-2.0), &obs(0.7, 2.0)).unwrap();
        assert_relative_eq!(action.delta[2], 0.0, epsilon = 1e-12);
        assert_eq!(action.delta[0], 0.4);
        let (action, _) = sliding_filter(&s2, &params, act(2.0), &obs(0.0, 2.4)).unwrap();
        assert_relative_eq!(action.delta[2], -0.4, epsilon = 1e-12);
    }

    #[test]
    fn disabled_gains_degenerate_to_first_contact_clamp() {
        // With beta2 = 0 and delta_f effectively infinite, the limit lands
        // exactly on the touch height: within one contact event the lock
        // behaves like the sliding pin.
        let mut params = DslParams::default();
        params.beta1 = [0.0; 3];
        params.beta2 = [0.0; 3];
        params.delta_f = [f64::INFINITY; 6];
        let mut dsl = DslState::new();
        let mut slide = SlidingState::default();
        let trace = [
            (0.0, 6.0, -2.0),
            (0.0, 3.5, -2.0),
            (0.0, 1.0, -2.0),
            (0.8, 0.5, -2.0), // contact at 0.5 mm
            (0.6, 0.5, -1.0),
            (0.55, 0.5, -2.0),
        ];
        for (fz, z_mm, dz) in trace {
            let o = obs(fz, z_mm);
            let (a1, d1) = dsl_filter(&dsl, &params, act(dz), &o).unwrap();
            let (a2, s2) = sliding_filter(&slide, &params, act(dz), &o).unwrap();
            assert_relative_eq!(a1.delta[2], a2.delta[2], epsilon = 1e-12);
            dsl = d1;
            slide = s2;
        }
        assert_relative_eq!(dsl.z_c.unwrap(), 5e-4, epsilon = 1e-15);
        assert_relative_eq!(slide.pinned_z.unwrap(), 5e-4, epsilon = 1e-15);
    }

    #[test]
    fn recorder_is_bounded_and_synchronized() {
        let mut params = DslParams::default();
        params.history = 4;
        let mut state = DslState::new();
        for k in 0..10 {
            let (_, s) =
                dsl_filter(&state, &params, act(0.0), &obs(0.0, 6.0 - k as f64 * 0.1)).unwrap();
            state = s;
            assert_eq!(state.r_f.len(), state.r_p.len());
            assert!(state.r_f.len() <= 4);
        }
        assert_eq!(state.r_f.len(), 4);
    }
}
