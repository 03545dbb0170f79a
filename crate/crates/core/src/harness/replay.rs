//! Trajectory replay: recompute rewards and safety-lock decisions from a
//! logged trajectory and verify they match the logged values, then render
//! depth-vs-step and force-vs-step charts.
//!
//! Rewards recompute from the logged post-step pose against the true hole
//! position; the lock's `z_c` sequence recomputes by re-running the
//! filter over the logged observation history (the limit is a pure
//! function of that history; logged floats round-trip exactly, so the
//! comparison demands exact equality). Any mismatch reports the step
//! index — replay divergence signals nondeterminism or a corrupted log.

use std::path::Path;

use crate::env::{Action, Observation};
use crate::reward::reward;
use crate::safety::{dsl_filter, DslState};
use crate::MM_PER_M;

use super::logging::{read_trajectory, TrajectoryRow};
use super::rollout::SafetyVariant;
use super::spec::{ExperimentSpec, HarnessError};

/// Result of a clean replay.
#[derive(Clone, Debug)]
pub struct ReplayOutcome {
    pub steps: usize,
    pub rewards_checked: usize,
    pub zc_checked: usize,
    /// Plain-text depth and force charts.
    pub chart: String,
}

/// Verify a trajectory CSV against the spec that produced it and render
/// charts. `svg_out`, when given, receives an SVG rendering.
pub fn replay(
    csv_path: &Path,
    spec: &ExperimentSpec,
    svg_out: Option<&Path>,
) -> Result<ReplayOutcome, HarnessError> {
    let rows = read_trajectory(csv_path)?;
    if rows.is_empty() {
        return Err(HarnessError::SchemaMismatch("empty trajectory".into()));
    }

    let mut rewards_checked = 0;
    for (i, row) in rows.iter().enumerate() {
        let recomputed = reward(
            [
                row.p_ee[0] / MM_PER_M,
                row.p_ee[1] / MM_PER_M,
                row.p_ee[2] / MM_PER_M,
            ],
            [
                row.p_h[0] / MM_PER_M,
                row.p_h[1] / MM_PER_M,
                row.p_h[2] / MM_PER_M,
            ],
            &spec.reward,
        );
        if (recomputed - row.reward).abs() > 1e-9 {
            return Err(HarnessError::ReplayDivergence {
                step: i,
                column: "reward".into(),
                logged: format!("{}", row.reward),
                recomputed: format!("{recomputed}"),
            });
        }
        rewards_checked += 1;
    }

    let mut zc_checked = 0;
    if spec.effective_safety() == SafetyVariant::Dsl {
        zc_checked = replay_dsl(&rows, spec)?;
    }

    let depth: Vec<f64> = rows.iter().map(|r| r.p_ee[2]).collect();
    let force: Vec<f64> = rows.iter().map(|r| r.wrench_norm[2]).collect();
    let mut chart = String::new();
    chart.push_str("depth (p_ee z, mm) vs step\n");
    chart.push_str(&text_chart(&depth, 64, 10));
    chart.push_str("\nnormalized F_z vs step\n");
    chart.push_str(&text_chart(&force, 64, 10));

    if let Some(path) = svg_out {
        std::fs::write(path, svg_chart(&depth, &force))?;
    }

    Ok(ReplayOutcome {
        steps: rows.len(),
        rewards_checked,
        zc_checked,
        chart,
    })
}

/// Re-run the lock over the logged observation stream. Row `t` logs the
/// state after step `t` and the filter decision that produced step `t`'s
/// action; the filter input for step `t` is row `t - 1`'s state, so the
/// recomputed state after processing row `t - 1` must match the fields
/// logged on row `t`.
fn replay_dsl(rows: &[TrajectoryRow], spec: &ExperimentSpec) -> Result<usize, HarnessError> {
    let mut state = DslState::new();
    let mut checked = 0;
    for t in 1..rows.len() {
        let prev = &rows[t - 1];
        let obs = Observation {
            p_ee: prev.p_ee,
            wrench_norm: prev.wrench_norm,
            theta_z: prev.theta_z,
            p_h_obs: prev.p_h_obs,
            mask: spec.model,
        };
        // The proposed action is irrelevant to the state transition.
        let (_, next) = dsl_filter(&state, &spec.dsl, Action::zero(), &obs)?;
        state = next;
        let logged = rows[t].filter.z_c;
        let recomputed = state.z_c.unwrap_or(f64::NAN);
        let matches = (logged.is_nan() && recomputed.is_nan()) || logged == recomputed;
        if !matches {
            return Err(HarnessError::ReplayDivergence {
                step: t,
                column: "dsl_zc_m".into(),
                logged: format!("{logged}"),
                recomputed: format!("{recomputed}"),
            });
        }
        checked += 1;
    }
    Ok(checked)
}

/// Minimal text chart: `height` rows of `width` columns, values
/// downsampled by taking the mean per column.
fn text_chart(values: &[f64], width: usize, height: usize) -> String {
    if values.is_empty() {
        return String::new();
    }
    let cols = width.min(values.len());
    let per = values.len() as f64 / cols as f64;
    let sampled: Vec<f64> = (0..cols)
        .map(|c| {
            let lo = (c as f64 * per) as usize;
            let hi = (((c + 1) as f64 * per) as usize).clamp(lo + 1, values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let min = sampled.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = sampled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (max - min).max(1e-12);
    let mut grid = vec![vec![' '; cols]; height];
    for (c, v) in sampled.iter().enumerate() {
        let r = ((max - v) / span * (height - 1) as f64).round() as usize;
        grid[r.min(height - 1)][c] = '*';
    }
    let mut out = String::new();
    for (r, row) in grid.iter().enumerate() {
        let label = if r == 0 {
            format!("{max:>9.3} ")
        } else if r == height - 1 {
            format!("{min:>9.3} ")
        } else {
            " ".repeat(10)
        };
        out.push_str(&label);
        out.push('|');
        out.extend(row.iter());
        out.push('\n');
    }
    out.push_str(&format!("{}+{}\n", " ".repeat(10), "-".repeat(cols)));
    out.push_str(&format!(
        "{}0 .. {} steps\n",
        " ".repeat(11),
        values.len()
    ));
    out
}

/// Two stacked polyline charts as a standalone SVG document.
fn svg_chart(depth: &[f64], force: &[f64]) -> String {
    let w = 640.0;
    let h = 200.0;
    let pad = 40.0;
    let polyline = |values: &[f64], y_off: f64| -> String {
        if values.is_empty() {
            return String::new();
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = (max - min).max(1e-12);
        let pts: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let x = pad + (w - 2.0 * pad) * i as f64 / (values.len().max(2) - 1) as f64;
                let y = y_off + pad + (h - 2.0 * pad) * (max - v) / span;
                format!("{x:.1},{y:.1}")
            })
            .collect();
        format!(
            "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1\" points=\"{}\"/>\n\
             <text x=\"{pad}\" y=\"{}\" font-size=\"10\">max {max:.3}</text>\n\
             <text x=\"{pad}\" y=\"{}\" font-size=\"10\">min {min:.3}</text>\n",
            pts.join(" "),
            y_off + pad - 6.0,
            y_off + h - pad + 12.0,
        )
    };
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{}\">\n\
         <text x=\"{pad}\" y=\"14\" font-size=\"12\">depth p_ee z (mm)</text>\n{}\
         <text x=\"{pad}\" y=\"{}\" font-size=\"12\">normalized F_z</text>\n{}\
         </svg>\n",
        2.0 * h,
        polyline(depth, 0.0),
        h + 14.0,
        polyline(force, h),
    )
}
