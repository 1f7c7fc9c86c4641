//! Versioned JSON file formats: scenarios and standalone measures.
//!
//! A scenario file pins everything a run depends on. Unknown keys are
//! rejected, every numeric field is validated against the scenario
//! invariants, and the `version` field must match [`crate::VERSION`]. The
//! seed may be omitted in the file only when supplied on the command line —
//! a run never invents a silent random seed.
//!
//! The scenario hash fingerprints the *effective* scenario (after seed
//! override and defaults), as the FNV-1a 64 hash of its canonical JSON
//! serialization; artifacts embed it so outputs can always be traced to
//! their exact inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, PhaseSpace};
use crate::models::MuSequence;
use crate::propagation::PropagationConfig;
use crate::rng::fnv1a64;
use crate::simulate::{Observable, Scenario};
use crate::VERSION;

/// Bare support/weights pair; the space comes from the surrounding document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportWeights {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: String,
    pub space: PhaseSpace,
    pub mu_sequence: MuSequence,
    pub nu0: SupportWeights,
    pub observable: Observable,
    pub horizon: u64,
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub epsilon: f64,
    pub start_points: Vec<f64>,
    #[serde(default)]
    pub propagation: PropagationConfig,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)
            .map_err(|e| Error::invalid("scenario", e.to_string()))?;
        if file.version != VERSION {
            return Err(Error::invalid(
                "version",
                format!("expected {VERSION}, found {}", file.version),
            ));
        }
        Ok(file)
    }

    /// Validates and binds the document into a runnable scenario. The seed
    /// must come from the file or the override; silence is an error.
    pub fn into_scenario(self, seed_override: Option<u64>) -> Result<Scenario> {
        let seed = seed_override.or(self.seed).ok_or_else(|| {
            Error::invalid("seed", "no seed in the scenario file and none supplied")
        })?;
        let nu0 = DiscreteMeasure::new(self.space.clone(), self.nu0.support, self.nu0.weights)?;
        let sc = Scenario {
            space: self.space,
            seq: self.mu_sequence,
            nu0,
            observable: self.observable,
            horizon: self.horizon,
            trials: self.trials,
            seed,
            epsilon: self.epsilon,
            start_points: self.start_points,
            propagation: self.propagation,
        };
        sc.validate()?;
        Ok(sc)
    }

    /// Snapshot of an effective scenario, suitable for hashing and artifacts.
    pub fn from_scenario(sc: &Scenario) -> ScenarioFile {
        ScenarioFile {
            version: VERSION.to_string(),
            space: sc.space.clone(),
            mu_sequence: sc.seq.clone(),
            nu0: SupportWeights {
                support: sc.nu0.positions().to_vec(),
                weights: sc.nu0.weights().to_vec(),
            },
            observable: sc.observable.clone(),
            horizon: sc.horizon,
            trials: sc.trials,
            seed: Some(sc.seed),
            epsilon: sc.epsilon,
            start_points: sc.start_points.clone(),
            propagation: sc.propagation,
        }
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serialization is infallible")
    }
}

/// Hex FNV-1a 64 fingerprint of the effective scenario.
pub fn scenario_hash(sc: &Scenario) -> String {
    format!("{:016x}", fnv1a64(ScenarioFile::from_scenario(sc).canonical_json().as_bytes()))
}

/// Standalone measure document for the distance subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    pub version: String,
    pub space: PhaseSpace,
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MeasureFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: MeasureFile = serde_json::from_str(text)
            .map_err(|e| Error::invalid("measure", e.to_string()))?;
        if file.version != VERSION {
            return Err(Error::invalid(
                "version",
                format!("expected {VERSION}, found {}", file.version),
            ));
        }
        Ok(file)
    }

    pub fn into_measure(self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::new(self.space, self.support, self.weights)
    }

    pub fn from_measure(m: &DiscreteMeasure) -> MeasureFile {
        MeasureFile {
            version: VERSION.to_string(),
            space: m.space().clone(),
            support: m.positions().to_vec(),
            weights: m.weights().to_vec(),
        }
    }
}
