//! Profiler for the uniform contraction condition.
//!
//! For each δ, find the smallest `m` such that the averaged images of two
//! initial measures after steps `n+1..n+m` are δ-close, for every probed
//! starting time `n` and every probed measure pair. The condition quantifies
//! over *all* pairs and times, so the probe set is a sampled surrogate:
//! Diracs at extreme points (worst case for contractions) plus seeded random
//! 4-atom mixtures. Pairs are propagated once per `(n, pair)` with the gap
//! recorded at every `m ≤ m_cap`; `m(δ)` is read off the shared
//! worst-gap-per-`m` table, which makes `m(δ)` automatically non-increasing
//! in δ. Not found within the cap is reported as `None` — honestly infinite
//! at this resolution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::Table;
use crate::error::{Error, Result};
use crate::measures::{wasserstein, DiscreteMeasure, PhaseSpace};
use crate::models::MuSequence;
use crate::propagation::{convolve_step_indexed, PropagationConfig};
use crate::rng::{domain, Stream};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SaProfileParams {
    /// Strictly decreasing targets.
    pub deltas: Vec<f64>,
    /// Starting times to probe.
    pub n_probes: Vec<u64>,
    /// Number of seeded random 4-atom probe measures.
    pub pair_samples: usize,
    /// Largest m searched.
    pub m_cap: usize,
    pub seed: u64,
}

impl Default for SaProfileParams {
    fn default() -> Self {
        SaProfileParams {
            deltas: vec![0.5, 0.2, 0.1, 0.05, 0.02, 0.01],
            n_probes: vec![0, 1, 5],
            pair_samples: 8,
            m_cap: 24,
            seed: 0,
        }
    }
}

/// Result table: `m(δ)` per δ and the underlying worst gap per m.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaProfile {
    pub deltas: Vec<f64>,
    /// Smallest m with worst gap < δ; None when not reached within m_cap.
    pub m_of_delta: Vec<Option<usize>>,
    /// worst_gap[m-1] = max over probes of the gap after m steps.
    pub worst_gap: Vec<f64>,
}

impl SaProfile {
    pub fn table(&self) -> Table {
        Table {
            name: "sa_profile".to_string(),
            columns: vec!["delta".to_string(), "m".to_string()],
            rows: self
                .deltas
                .iter()
                .zip(&self.m_of_delta)
                .map(|(&d, m)| vec![d, m.map(|v| v as f64).unwrap_or(f64::INFINITY)])
                .collect(),
        }
    }

    pub fn gap_table(&self) -> Table {
        Table {
            name: "sa_worst_gap".to_string(),
            columns: vec!["m".to_string(), "worst_gap".to_string()],
            rows: self
                .worst_gap
                .iter()
                .enumerate()
                .map(|(i, &g)| vec![(i + 1) as f64, g])
                .collect(),
        }
    }
}

fn probe_measures(
    space: &PhaseSpace,
    pair_samples: usize,
    seed: u64,
) -> Result<Vec<DiscreteMeasure>> {
    let mut probes = Vec::new();
    match space {
        PhaseSpace::Interval { lo, hi } => {
            probes.push(DiscreteMeasure::dirac(space.clone(), *lo)?);
            probes.push(DiscreteMeasure::dirac(space.clone(), *hi)?);
        }
        PhaseSpace::ProjectiveLine => {
            for j in 0..8 {
                probes.push(DiscreteMeasure::dirac(space.clone(), j as f64 * PI / 8.0)?);
            }
        }
        PhaseSpace::FiniteSet { labels, .. } => {
            for j in 0..labels.len() {
                probes.push(DiscreteMeasure::dirac(space.clone(), j as f64)?);
            }
        }
    }
    for s in 0..pair_samples {
        let stream = Stream::new(seed, domain::PROBES, s as u64);
        let mut seq = stream.sequence();
        let positions: Vec<f64> = (0..4)
            .map(|_| match space {
                PhaseSpace::Interval { lo, hi } => seq.next_range(*lo, *hi),
                PhaseSpace::ProjectiveLine => seq.next_range(0.0, PI),
                PhaseSpace::FiniteSet { labels, .. } => {
                    (seq.next_f64() * labels.len() as f64).floor().min(labels.len() as f64 - 1.0)
                }
            })
            .collect();
        let raw: Vec<f64> = (0..4).map(|_| seq.next_f64() + 0.05).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|r| r / total).collect();
        probes.push(DiscreteMeasure::new(space.clone(), positions, weights)?);
    }
    Ok(probes)
}

/// Profiles `m(δ)` for a step sequence over sampled probe pairs.
pub fn profile_standing_assumption(
    seq: &MuSequence,
    space: &PhaseSpace,
    params: &SaProfileParams,
    cfg: &PropagationConfig,
) -> Result<SaProfile> {
    if params.deltas.is_empty() || params.deltas.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::invalid("deltas", "deltas must be strictly decreasing"));
    }
    if params.deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::invalid("deltas", "deltas must be positive"));
    }
    if params.m_cap == 0 || params.n_probes.is_empty() {
        return Err(Error::invalid("m_cap", "m_cap and n_probes must be nonempty"));
    }
    seq.validate_on(space)?;
    let probes = probe_measures(space, params.pair_samples, params.seed)?;
    let mut jobs = Vec::new();
    for &n in &params.n_probes {
        for i in 0..probes.len() {
            for j in (i + 1)..probes.len() {
                jobs.push((n, i, j));
            }
        }
    }
    let view_seq = seq;
    let worst_gap = jobs
        .par_iter()
        .map(|&(n, i, j)| -> Result<Vec<f64>> {
            let view = view_seq.view();
            let mut a = probes[i].clone();
            let mut b = probes[j].clone();
            let mut gaps = Vec::with_capacity(params.m_cap);
            for m in 1..=params.m_cap as u64 {
                let dist = view.at(n + m);
                a = convolve_step_indexed(dist, &a, cfg, n + m)?;
                b = convolve_step_indexed(dist, &b, cfg, n + m)?;
                gaps.push(wasserstein(&a, &b)?);
            }
            Ok(gaps)
        })
        .try_reduce(
            || vec![0.0; params.m_cap],
            |mut acc, gaps| {
                for (a, g) in acc.iter_mut().zip(gaps) {
                    *a = a.max(g);
                }
                Ok(acc)
            },
        )?;

    let m_of_delta = params
        .deltas
        .iter()
        .map(|&d| worst_gap.iter().position(|&g| g < d).map(|i| i + 1))
        .collect();
    Ok(SaProfile { deltas: params.deltas.clone(), m_of_delta, worst_gap })
}
