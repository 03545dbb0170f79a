//! Ablation matrices: train and evaluate a list of experiment specs
//! (each over its seeds), aggregate the results, and emit a combined CSV
//! plus a Markdown summary.
//!
//! Cells run in parallel worker threads; each cell owns its run
//! directory, so there is no shared mutable state. A failing cell is
//! recorded and the remaining cells continue.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Deserialize;

use crate::geometry::Catalogue;

use super::eval::evaluate;
use super::spec::{ExperimentSpec, HarnessError, RunPaths};
use super::train::train;

/// One trained-and-evaluated (spec, seed) pair.
#[derive(Clone, Debug)]
pub struct AblationCell {
    pub spec_name: String,
    pub model: String,
    pub safety: String,
    pub shape: String,
    pub clearance_mm: f64,
    pub gap_proportion: f64,
    pub seed: u64,
    pub spec_hash: String,
    pub outcome: AblationOutcome,
}

#[derive(Clone, Debug)]
pub enum AblationOutcome {
    Done {
        checkpoint: PathBuf,
        success_rate: f64,
        var_success: f64,
        mean_reward: f64,
        var_reward: f64,
        peak_fz_norm: f64,
        peak_fz_raw: f64,
    },
    Failed(String),
}

/// The whole matrix plus aggregation helpers.
#[derive(Clone, Debug, Default)]
pub struct AblationReport {
    pub cells: Vec<AblationCell>,
}

/// TOML shape of a matrix file: `[[specs]]` tables.
#[derive(Deserialize)]
struct MatrixFile {
    specs: Vec<ExperimentSpec>,
}

/// Parse a matrix file into validated specs.
pub fn load_matrix(path: &Path) -> Result<Vec<ExperimentSpec>, HarnessError> {
    let file: MatrixFile = toml::from_str(&std::fs::read_to_string(path)?)?;
    for spec in &file.specs {
        spec.validate()?;
    }
    Ok(file.specs)
}

/// Train and evaluate every (spec, seed) cell with up to `jobs` worker
/// threads.
pub fn run_ablation(
    specs: &[ExperimentSpec],
    run_root: Option<&Path>,
    catalogue: &Catalogue,
    jobs: usize,
) -> Result<AblationReport, HarnessError> {
    let mut work: Vec<(usize, ExperimentSpec, u64)> = Vec::new();
    for spec in specs {
        for &seed in &spec.seeds {
            work.push((work.len(), spec.clone(), seed));
        }
    }
    let results: Mutex<Vec<Option<AblationCell>>> = Mutex::new(vec![None; work.len()]);
    let queue: Mutex<std::vec::IntoIter<(usize, ExperimentSpec, u64)>> =
        Mutex::new(work.into_iter());
    let jobs = jobs.max(1);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let item = queue.lock().unwrap().next();
                let Some((index, spec, seed)) = item else {
                    break;
                };
                let cell = run_cell(&spec, seed, run_root, catalogue);
                results.lock().unwrap()[index] = Some(cell);
            });
        }
    });
    let cells = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|c| c.expect("every cell ran"))
        .collect();
    Ok(AblationReport { cells })
}

fn run_cell(
    spec: &ExperimentSpec,
    seed: u64,
    run_root: Option<&Path>,
    catalogue: &Catalogue,
) -> AblationCell {
    let (clearance, proportion) = match spec.build_env_config(catalogue) {
        Ok(config) => (
            spec.resolve_clearance(&config.peg),
            spec.resolved_gap_proportion(&config),
        ),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let mut cell = AblationCell {
        spec_name: spec.name.clone(),
        model: spec.model.as_str().to_string(),
        safety: spec.safety.as_str().to_string(),
        shape: spec.shape.clone(),
        clearance_mm: clearance,
        gap_proportion: proportion,
        seed,
        spec_hash: spec.spec_hash(),
        outcome: AblationOutcome::Failed("did not run".into()),
    };
    let outcome = (|| -> Result<AblationOutcome, HarnessError> {
        let trained = train(spec, seed, run_root, catalogue, false)?;
        let report = evaluate(&trained.best_checkpoint, spec, catalogue, seed)?;
        let paths = RunPaths::new(run_root, spec, seed);
        report.write_csv(&paths.eval_report())?;
        Ok(AblationOutcome::Done {
            checkpoint: trained.best_checkpoint,
            success_rate: report.success_rate,
            var_success: report.var_success,
            mean_reward: report.mean_reward,
            var_reward: report.var_reward,
            peak_fz_norm: report.peak_fz_norm,
            peak_fz_raw: report.peak_fz_raw,
        })
    })();
    cell.outcome = match outcome {
        Ok(done) => done,
        Err(e) => AblationOutcome::Failed(e.to_string()),
    };
    cell
}

impl AblationReport {
    /// Median success rate over the seeds of one named spec; NaN when the
    /// spec has no successful cells.
    pub fn median_success(&self, spec_name: &str) -> f64 {
        let mut rates: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.spec_name == spec_name)
            .filter_map(|c| match &c.outcome {
                AblationOutcome::Done { success_rate, .. } => Some(*success_rate),
                AblationOutcome::Failed(_) => None,
            })
            .collect();
        if rates.is_empty() {
            return f64::NAN;
        }
        rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = rates.len();
        if n % 2 == 1 {
            rates[n / 2]
        } else {
            0.5 * (rates[n / 2 - 1] + rates[n / 2])
        }
    }

    /// The cell whose success rate is the per-spec median (lower median
    /// for even counts); used to pick a representative checkpoint.
    pub fn median_cell(&self, spec_name: &str) -> Option<&AblationCell> {
        let mut done: Vec<&AblationCell> = self
            .cells
            .iter()
            .filter(|c| {
                c.spec_name == spec_name && matches!(c.outcome, AblationOutcome::Done { .. })
            })
            .collect();
        if done.is_empty() {
            return None;
        }
        done.sort_by(|a, b| {
            let ra = match &a.outcome {
                AblationOutcome::Done { success_rate, .. } => *success_rate,
                _ => f64::NAN,
            };
            let rb = match &b.outcome {
                AblationOutcome::Done { success_rate, .. } => *success_rate,
                _ => f64::NAN,
            };
            ra.partial_cmp(&rb).unwrap()
        });
        Some(done[(done.len() - 1) / 2])
    }

    pub const CSV_HEADER: &'static [&'static str] = &[
        "spec",
        "model",
        "safety",
        "shape",
        "clearance_mm",
        "gap_proportion",
        "seed",
        "spec_hash",
        "status",
        "checkpoint",
        "success_rate",
        "var_success",
        "mean_reward",
        "var_reward",
        "peak_fz_norm",
        "peak_fz_raw",
    ];

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(Self::CSV_HEADER)?;
        for c in &self.cells {
            let mut rec = vec![
                c.spec_name.clone(),
                c.model.clone(),
                c.safety.clone(),
                c.shape.clone(),
                format!("{}", c.clearance_mm),
                format!("{}", c.gap_proportion),
                c.seed.to_string(),
                c.spec_hash.clone(),
            ];
            match &c.outcome {
                AblationOutcome::Done {
                    checkpoint,
                    success_rate,
                    var_success,
                    mean_reward,
                    var_reward,
                    peak_fz_norm,
                    peak_fz_raw,
                } => {
                    rec.push("done".into());
                    rec.push(checkpoint.display().to_string());
                    rec.push(format!("{success_rate}"));
                    rec.push(format!("{var_success}"));
                    rec.push(format!("{mean_reward}"));
                    rec.push(format!("{var_reward}"));
                    rec.push(format!("{peak_fz_norm}"));
                    rec.push(format!("{peak_fz_raw}"));
                }
                AblationOutcome::Failed(msg) => {
                    rec.push(format!("failed: {msg}"));
                    for _ in 0..7 {
                        rec.push(String::new());
                    }
                }
            }
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Markdown summary: one row per cell, grouped by spec, with the
    /// reward/success means and variances and the per-cell force peak.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| spec | model | safety | shape | clearance (mm) | proportion | seed | success (ME/VAR) | reward (ME/VAR) | peak Fz (norm) |\n\
             |---|---|---|---|---|---|---|---|---|---|\n",
        );
        let mut ordered = self.cells.clone();
        ordered.sort_by(|a, b| {
            (a.model.clone(), a.clearance_mm.total_cmp(&b.clearance_mm), a.spec_name.clone(), a.seed)
                .partial_cmp(&(b.model.clone(), std::cmp::Ordering::Equal, b.spec_name.clone(), b.seed))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for c in &ordered {
            match &c.outcome {
                AblationOutcome::Done {
                    success_rate,
                    var_success,
                    mean_reward,
                    var_reward,
                    peak_fz_norm,
                    ..
                } => {
                    out.push_str(&format!(
                        "| {} | {} | {} | {} | {:.3} | {:.4} | {} | {:.4} / {:.4} | {:.4} / {:.4} | {:.4} |\n",
                        c.spec_name,
                        c.model,
                        c.safety,
                        c.shape,
                        c.clearance_mm,
                        c.gap_proportion,
                        c.seed,
                        success_rate,
                        var_success,
                        mean_reward,
                        var_reward,
                        peak_fz_norm
                    ));
                }
                AblationOutcome::Failed(msg) => {
                    out.push_str(&format!(
                        "| {} | {} | {} | {} | {:.3} | {:.4} | {} | failed: {} | | |\n",
                        c.spec_name, c.model, c.safety, c.shape, c.clearance_mm, c.gap_proportion, c.seed, msg
                    ));
                }
            }
        }
        out
    }
}
