//! The monotone quantile coupling between two measures on the line.
//!
//! For measures `ρ, ρ′` on an interval, define
//!
//! ```text
//! Φ_ρ(y, z) = ρ((−∞, y)) + z · ρ({y}),        z ~ Uniform[0, 1],
//! Ψ_ρ′(s)  = sup { y : ρ′((−∞, y)) ≤ s }.
//! ```
//!
//! If `y ~ ρ` and `z` is independent uniform, then `Φ_ρ(y, z)` is uniform on
//! `[0, 1]` — the auxiliary variable dissolves the atoms of the discrete CDF —
//! and `Ψ_ρ′` pushes the uniform law to `ρ′`. The composition therefore
//! couples `ρ` with `ρ′`, and monotonicity makes the coupling optimal for the
//! Wasserstein-1 cost (it is the classic quantile coupling).

use super::{DiscreteMeasure, POSITION_MERGE_TOL};
use crate::error::{Error, Result};

/// Mass strictly below `y` under a canonical measure.
fn mass_below(rho: &DiscreteMeasure, y: f64) -> f64 {
    rho.positions()
        .iter()
        .zip(rho.weights())
        .take_while(|(&x, _)| x < y - POSITION_MERGE_TOL)
        .map(|(_, &w)| w)
        .sum()
}

/// Mass of the atom at `y` (positions within merge tolerance count).
fn mass_at(rho: &DiscreteMeasure, y: f64) -> f64 {
    rho.positions()
        .iter()
        .zip(rho.weights())
        .filter(|(&x, _)| (x - y).abs() <= POSITION_MERGE_TOL)
        .map(|(_, &w)| w)
        .sum()
}

/// Generalized inverse CDF: the largest point whose strictly-below mass does
/// not exceed `s`. For a discrete measure this is the first atom whose
/// cumulative weight exceeds `s` (the last atom when `s` reaches total mass).
fn quantile(rho: &DiscreteMeasure, s: f64) -> f64 {
    let mut cum = 0.0;
    for (&x, &w) in rho.positions().iter().zip(rho.weights()) {
        cum += w;
        if cum > s {
            return x;
        }
    }
    *rho.positions().last().unwrap()
}

/// One evaluation of the monotone coupling `Ψ_ρ′(Φ_ρ(y, z))`.
///
/// With `(y, z) ~ ρ × Uniform[0,1]` the output is distributed as `ρ′`, and the
/// induced joint law `(y, output)` attains the Wasserstein-1 distance between
/// `ρ` and `ρ′`.
pub fn quantile_coupling(
    rho: &DiscreteMeasure,
    rho_prime: &DiscreteMeasure,
    y: f64,
    z: f64,
) -> Result<f64> {
    if rho.space() != rho_prime.space() {
        return Err(Error::SpaceMismatch);
    }
    if !rho.space().is_interval() {
        return Err(Error::SpaceMismatch);
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::invalid("z", format!("auxiliary variable {z} outside [0, 1]")));
    }
    let s = (mass_below(rho, y) + z * mass_at(rho, y)).clamp(0.0, 1.0);
    Ok(quantile(rho_prime, s))
}

/// Draws one coupled pair `(y, Ψ_ρ′(Φ_ρ(y, z)))` from two uniforms; used by
/// the statistical contract tests and the coupling demos.
pub fn sample_coupled_pair(
    rho: &DiscreteMeasure,
    rho_prime: &DiscreteMeasure,
    u: f64,
    z: f64,
) -> Result<(f64, f64)> {
    let y = quantile(rho, u.clamp(0.0, 1.0));
    let out = quantile_coupling(rho, rho_prime, y, z)?;
    Ok((y, out))
}
