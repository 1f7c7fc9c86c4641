//! Irrational-rotation experiment with time-dependent observables.
//!
//! The circle rotation `f(u) = u + α mod 1` is uniquely ergodic but admits no
//! randomness: two orbits never approach each other, so the uniform
//! contraction condition fails. Time-dependent observables expose the
//! consequence. With `φ_k = φ ∘ f^{−k}` the time average collapses
//! identically,
//!
//! ```text
//! (1/n) Σ_{k=1..n} φ_k(f^k(x₀)) = φ(x₀)   for every n,
//! ```
//!
//! — an exact arithmetic identity, checked here to 1e−12 — so there is no
//! constant-like limiting behaviour independent of `x₀`. The epoch-shifted
//! family `φ_n = φ ∘ f^{−n + r(n)}`, with `r(n)` counting the passed epochs
//! of the schedule `n_k = 2^(k²)`, instead evaluates `φ(x₀ + r(n)·α)`, whose
//! running averages jump at every epoch boundary and never converge.
//!
//! Numerics: forward and inverse rotations share the reduced angle
//! `(k·α) mod 1`, so each term of the identity costs a few ulps instead of
//! accumulating drift over iterated steps.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{ExperimentReport, Table, Verdict};
use crate::error::{Error, Result};
use crate::models::MuSequence;
use crate::simulate::Observable;
use crate::VERSION;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotationParams {
    /// Rotation per step, in full turns. Default: golden-ratio conjugate.
    pub alpha: f64,
    /// Start point in normalized circle coordinates `[0, 1)`.
    pub x0: f64,
    /// Horizon for the exact-identity check.
    pub horizon: u64,
    /// Epoch count for the shifted-observable variant.
    pub kmax: u32,
    /// Observable; evaluated on the projective-line angle coordinate.
    pub observable: Observable,
}

impl Default for RotationParams {
    fn default() -> Self {
        RotationParams {
            alpha: (5f64.sqrt() - 1.0) / 2.0,
            x0: 0.2,
            horizon: 10_000,
            kmax: 4,
            observable: Observable::CosK { k: 1 },
        }
    }
}

const IDENTITY_TOL: f64 = 1e-12;
const JUMP_THRESHOLD: f64 = 0.1;

pub fn run_rotation_counterexample(params: &RotationParams) -> Result<ExperimentReport> {
    if params.horizon < 1 {
        return Err(Error::invalid("horizon", "horizon must be positive"));
    }
    if !(3..=6).contains(&params.kmax) {
        return Err(Error::invalid("kmax", "shifted variant needs 3 <= kmax <= 6"));
    }
    let space = crate::measures::PhaseSpace::projective_line();
    params.observable.validate_on(&space)?;
    let phi = |u: f64| params.observable.eval(&space, u * PI);
    let u0 = params.x0.rem_euclid(1.0);
    let target = phi(u0);

    // Part 1: the exact identity. Forward orbit u_k = u0 + r_k and inverse
    // observable u ↦ u − r_k share r_k = (k·alpha) mod 1.
    let mut sum = 0.0;
    let mut max_dev: f64 = 0.0;
    let mut identity_rows = Vec::new();
    let mut next_dyadic = 1u64;
    for n in 1..=params.horizon {
        let r = (n as f64 * params.alpha).rem_euclid(1.0);
        let u_n = (u0 + r).rem_euclid(1.0);
        let back = (u_n - r).rem_euclid(1.0);
        sum += phi(back);
        let avg = sum / n as f64;
        let dev = (avg - target).abs();
        max_dev = max_dev.max(dev);
        if n == next_dyadic || n == params.horizon {
            identity_rows.push(vec![n as f64, avg, dev]);
            next_dyadic *= 2;
        }
    }

    // Part 2: epoch-shifted observables over the sparse schedule.
    let schedule = MuSequence::two_point_sparse_schedule(params.kmax)?;
    let last = *schedule.last().unwrap();
    let mut sum2 = 0.0;
    let mut passed = 0usize;
    let mut boundary_rows: Vec<Vec<f64>> = Vec::new();
    for n in 1..=last {
        while passed < schedule.len() && n > schedule[passed] {
            passed += 1;
        }
        let r_n = (n as f64 * params.alpha).rem_euclid(1.0);
        let u_n = (u0 + r_n).rem_euclid(1.0);
        let shift = ((n - passed as u64) as f64 * params.alpha).rem_euclid(1.0);
        sum2 += phi((u_n - shift).rem_euclid(1.0));
        if schedule.binary_search(&n).is_ok() {
            boundary_rows.push(vec![n as f64, sum2 / n as f64]);
        }
    }
    let mut min_jump = f64::INFINITY;
    // Boundaries from n_2 on; the first epoch is too short to dominate.
    for w in boundary_rows[1..].windows(2) {
        min_jump = min_jump.min((w[0][1] - w[1][1]).abs());
    }

    let constant = params.observable.is_effectively_constant(&space);
    let verdict = if constant {
        Verdict::Inconclusive { reason: "constant observable".to_string() }
    } else if max_dev > IDENTITY_TOL {
        Verdict::Inconclusive {
            reason: format!("identity drift {max_dev:e} exceeded {IDENTITY_TOL:e}"),
        }
    } else if min_jump >= JUMP_THRESHOLD {
        Verdict::ExhibitsCounterexample
    } else {
        Verdict::Inconclusive {
            reason: format!("epoch-boundary jump {min_jump:.4} below {JUMP_THRESHOLD}"),
        }
    };

    let tables = vec![
        Table {
            name: "unshifted_average".to_string(),
            columns: vec!["n".to_string(), "avg".to_string(), "abs_dev_from_phi_x0".to_string()],
            rows: identity_rows,
        },
        Table {
            name: "shifted_boundary_average".to_string(),
            columns: vec!["n".to_string(), "avg".to_string()],
            rows: boundary_rows,
        },
    ];
    let notes = vec![
        format!("max |avg_n − φ(x₀)| over n ≤ {} was {max_dev:e}", params.horizon),
        format!("min consecutive epoch-boundary jump (from n_2 on): {min_jump}"),
    ];

    Ok(ExperimentReport {
        name: "rotation".to_string(),
        version: VERSION.to_string(),
        scenario: serde_json::to_value(params).expect("params serialize"),
        verdict,
        tables,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_holds_to_tolerance_and_epochs_jump() {
        let report = run_rotation_counterexample(&RotationParams::default()).unwrap();
        assert_eq!(report.verdict, Verdict::ExhibitsCounterexample);
        // Every recorded average sits on phi(x0) to 1e-12.
        for row in &report.tables[0].rows {
            assert!(row[2] <= 1e-12, "n={} dev={}", row[0], row[2]);
        }
    }

    #[test]
    fn arbitrary_start_points_pin_to_their_own_value() {
        for &x0 in &[0.0, 0.31, 0.77] {
            let params = RotationParams { x0, horizon: 2000, ..Default::default() };
            let report = run_rotation_counterexample(&params).unwrap();
            assert!(matches!(report.verdict, Verdict::ExhibitsCounterexample));
        }
    }

    #[test]
    fn constant_observable_degenerates() {
        let params = RotationParams {
            observable: Observable::CosK { k: 0 },
            ..Default::default()
        };
        let report = run_rotation_counterexample(&params).unwrap();
        assert_eq!(
            report.verdict,
            Verdict::Inconclusive { reason: "constant observable".to_string() }
        );
    }
}
