//! Canned experiments behind a name registry, plus the uniform-contraction
//! profiler.
//!
//! Each experiment implements [`Experiment`]: it takes a JSON parameter
//! object, runs to a [`ExperimentReport`] carrying its verdict, result
//! tables, and the exact parameter snapshot (seed included) needed to
//! reproduce it bitwise. The CLI looks experiments up by name; adding a new
//! one means implementing the trait and listing it in [`registry`].
//!
//! Verdicts describe the numerical evidence only — `EXHIBITS_COUNTEREXAMPLE`
//! says the run displayed the documented failure mode at the calibrated
//! thresholds, not that anything is proven.

mod rotation;
mod sa_profile;
mod slow_diffusion;

pub use rotation::{run_rotation_counterexample, RotationParams};
pub use sa_profile::{profile_standing_assumption, SaProfile, SaProfileParams};
pub use slow_diffusion::{run_slow_diffusion, SlowDiffusionParams};

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Outcome classification of an experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE", deny_unknown_fields)]
pub enum Verdict {
    ConfirmsTheorem,
    ExhibitsCounterexample,
    /// Always carries a machine-readable reason.
    Inconclusive { reason: String },
}

/// A named numeric table; first two columns double as plot data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_cell(*v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Two-column whitespace file for external plotting tools.
    pub fn plotdata(&self) -> String {
        let mut s = String::new();
        for row in &self.rows {
            if row.len() >= 2 {
                s.push_str(&format!("{} {}\n", fmt_cell(row[0]), fmt_cell(row[1])));
            }
        }
        s
    }
}

fn fmt_cell(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v}")
    }
}

/// Result of one experiment run: verdict, tables, notes, and the full
/// parameter snapshot that reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub version: String,
    /// The exact parameters (seed included) this report was produced from.
    pub scenario: serde_json::Value,
    pub verdict: Verdict,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    /// Writes `report.json`, one CSV per table, and `plotdata/<table>.dat`.
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir.join("plotdata"))?;
        let mut f = std::fs::File::create(dir.join("report.json"))?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        for table in &self.tables {
            std::fs::write(dir.join(format!("{}.csv", table.name)), table.to_csv())?;
            std::fs::write(
                dir.join("plotdata").join(format!("{}.dat", table.name)),
                table.plotdata(),
            )?;
        }
        Ok(())
    }
}

/// A named, rerunnable experiment.
pub trait Experiment: Sync + Send {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    /// Runs with a JSON parameter object (missing fields take defaults;
    /// unknown fields are rejected).
    fn run(&self, params: &serde_json::Value) -> Result<ExperimentReport>;
}

struct SlowDiffusionExperiment;

impl Experiment for SlowDiffusionExperiment {
    fn name(&self) -> &'static str {
        "slow"
    }
    fn summary(&self) -> &'static str {
        "two-point system with sparse shuffles: time averages oscillate between the observable's values instead of settling"
    }
    fn run(&self, params: &serde_json::Value) -> Result<ExperimentReport> {
        let p: SlowDiffusionParams = serde_json::from_value(params.clone())
            .map_err(|e| Error::invalid("params", e.to_string()))?;
        run_slow_diffusion(&p)
    }
}

struct RotationExperiment;

impl Experiment for RotationExperiment {
    fn name(&self) -> &'static str {
        "rotation"
    }
    fn summary(&self) -> &'static str {
        "irrational rotation with time-dependent observables: the average pins to phi(x0) exactly, and epoch-shifted observables never settle"
    }
    fn run(&self, params: &serde_json::Value) -> Result<ExperimentReport> {
        let p: RotationParams = serde_json::from_value(params.clone())
            .map_err(|e| Error::invalid("params", e.to_string()))?;
        run_rotation_counterexample(&p)
    }
}

/// All registered experiments.
pub fn registry() -> Vec<Box<dyn Experiment>> {
    vec![Box::new(SlowDiffusionExperiment), Box::new(RotationExperiment)]
}

/// Looks an experiment up by its registered name.
pub fn find(name: &str) -> Option<Box<dyn Experiment>> {
    registry().into_iter().find(|e| e.name() == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_dispatches_by_name() {
        let names: Vec<&str> = registry().iter().map(|e| e.name()).collect();
        assert!(names.contains(&"slow"));
        assert!(names.contains(&"rotation"));
        assert!(find("slow").is_some());
        assert!(find("nope").is_none());
    }

    #[test]
    fn unknown_param_keys_are_rejected() {
        let exp = find("rotation").unwrap();
        let err = exp
            .run(&serde_json::json!({"bogus": 1}))
            .unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn verdict_json_shape() {
        let v = Verdict::Inconclusive { reason: "constant observable".into() };
        let js = serde_json::to_string(&v).unwrap();
        assert_eq!(js, r#"{"kind":"INCONCLUSIVE","reason":"constant observable"}"#);
        assert_eq!(
            serde_json::to_string(&Verdict::ConfirmsTheorem).unwrap(),
            r#"{"kind":"CONFIRMS_THEOREM"}"#
        );
    }
}
