//! Discrete probability measures on one-dimensional phase spaces, with exact
//! Wasserstein-1 distances.
//!
//! Three phase-space kinds cover every system in this crate:
//!
//! - `Interval(lo, hi)` with `d(x,y) = |x − y|`,
//! - `ProjectiveLine` — directions in the plane modulo sign, parameterized by
//!   an angle in `[0, π)` with the wrap-around metric
//!   `d(x,y) = min(|x−y|, π−|x−y|)` (diameter `π/2`),
//! - `FiniteSet` — labeled points with an explicit metric table.
//!
//! The Wasserstein-1 distance between probability measures is the minimal
//! expected transport cost `inf_γ ∬ d(x,y) dγ` over couplings `γ` with the
//! prescribed marginals. On an interval it reduces to the CDF-difference
//! integral `∫ |F_μ − F_ν| dt`; on the circle it is the same integral
//! minimized over a constant CDF shift, whose optimizer is a weighted median.
//! [`transport`] solves the underlying linear program exactly on small
//! instances and serves as the independent oracle for both closed forms.

pub mod coupling;
pub mod transport;

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Atoms closer than this are merged during canonicalization.
pub const POSITION_MERGE_TOL: f64 = 1e-12;
/// Probability weights must sum to 1 within this tolerance.
pub const MASS_TOL: f64 = 1e-12;
/// Slack allowed when checking that points lie in their phase space.
const MEMBERSHIP_TOL: f64 = 1e-9;

/// A compact one-dimensional phase space with its metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseSpace {
    Interval { lo: f64, hi: f64 },
    ProjectiveLine,
    FiniteSet { labels: Vec<String>, metric: Vec<Vec<f64>> },
}

impl PhaseSpace {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        let s = PhaseSpace::Interval { lo, hi };
        s.validate()?;
        Ok(s)
    }

    pub fn projective_line() -> Self {
        PhaseSpace::ProjectiveLine
    }

    pub fn finite_set(labels: Vec<String>, metric: Vec<Vec<f64>>) -> Result<Self> {
        let s = PhaseSpace::FiniteSet { labels, metric };
        s.validate()?;
        Ok(s)
    }

    /// The two-point space `{a, b}` at distance 1.
    pub fn two_point() -> Self {
        PhaseSpace::FiniteSet {
            labels: vec!["a".to_string(), "b".to_string()],
            metric: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PhaseSpace::Interval { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                    return Err(Error::invalid("space", format!("interval [{lo}, {hi}] requires lo < hi")));
                }
            }
            PhaseSpace::ProjectiveLine => {}
            PhaseSpace::FiniteSet { labels, metric } => {
                let n = labels.len();
                if n == 0 {
                    return Err(Error::invalid("space", "finite set needs at least one label"));
                }
                if metric.len() != n || metric.iter().any(|row| row.len() != n) {
                    return Err(Error::invalid("space", "metric table shape must match label count"));
                }
                for i in 0..n {
                    if metric[i][i] != 0.0 {
                        return Err(Error::invalid("space", "metric diagonal must be zero"));
                    }
                    for j in 0..n {
                        let d = metric[i][j];
                        if !d.is_finite() || d < 0.0 {
                            return Err(Error::invalid("space", "metric entries must be finite and nonnegative"));
                        }
                        if (d - metric[j][i]).abs() > 1e-12 {
                            return Err(Error::invalid("space", "metric table must be symmetric"));
                        }
                        if i != j && d == 0.0 {
                            return Err(Error::invalid("space", "distinct labels must have positive distance"));
                        }
                        for k in 0..n {
                            if d > metric[i][k] + metric[k][j] + 1e-12 {
                                return Err(Error::invalid("space", "metric table violates the triangle inequality"));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Metric distance between two points of this space.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        match self {
            PhaseSpace::Interval { .. } => (x - y).abs(),
            PhaseSpace::ProjectiveLine => {
                let d = (x - y).abs() % PI;
                d.min(PI - d)
            }
            PhaseSpace::FiniteSet { metric, .. } => metric[x as usize][y as usize],
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            PhaseSpace::Interval { lo, hi } => hi - lo,
            PhaseSpace::ProjectiveLine => PI / 2.0,
            PhaseSpace::FiniteSet { metric, .. } => metric
                .iter()
                .flatten()
                .copied()
                .fold(0.0, f64::max),
        }
    }

    /// Brings a raw coordinate into the canonical representation of the
    /// space, or rejects it when it lies outside.
    pub fn normalize_point(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::invalid("support", "points must be finite"));
        }
        match self {
            PhaseSpace::Interval { lo, hi } => {
                if x < lo - MEMBERSHIP_TOL || x > hi + MEMBERSHIP_TOL {
                    return Err(Error::invalid(
                        "support",
                        format!("point {x} outside interval [{lo}, {hi}]"),
                    ));
                }
                Ok(x.clamp(*lo, *hi))
            }
            PhaseSpace::ProjectiveLine => {
                let mut a = x.rem_euclid(PI);
                if a >= PI {
                    a = 0.0;
                }
                Ok(a)
            }
            PhaseSpace::FiniteSet { labels, .. } => {
                let idx = x.round();
                if (x - idx).abs() > MEMBERSHIP_TOL || idx < 0.0 || idx as usize >= labels.len() {
                    return Err(Error::invalid(
                        "support",
                        format!("point {x} is not a label index of the finite set"),
                    ));
                }
                Ok(idx)
            }
        }
    }

    pub fn is_interval(&self) -> bool {
        matches!(self, PhaseSpace::Interval { .. })
    }

    pub fn is_projective_line(&self) -> bool {
        matches!(self, PhaseSpace::ProjectiveLine)
    }
}

/// Counterclockwise arc on the projective line: from `from` to `to`, half-open
/// `[from, to)` so that atomic measures never double-count endpoints. An arc
/// with `to < from` wraps through 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", try_from = "[f64; 2]")]
pub struct Arc {
    pub from: f64,
    pub to: f64,
}

impl Arc {
    pub fn new(from: f64, to: f64) -> Result<Self> {
        if !(0.0..PI).contains(&from) || !(0.0..PI).contains(&to) {
            return Err(Error::invalid("arc", "endpoints must lie in [0, pi)"));
        }
        Ok(Arc { from, to })
    }

    pub fn contains(&self, theta: f64) -> bool {
        if self.from <= self.to {
            self.from <= theta && theta < self.to
        } else {
            theta >= self.from || theta < self.to
        }
    }

    pub fn length(&self) -> f64 {
        (self.to - self.from).rem_euclid(PI)
    }
}

impl From<Arc> for [f64; 2] {
    fn from(a: Arc) -> Self {
        [a.from, a.to]
    }
}

impl TryFrom<[f64; 2]> for Arc {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Arc::new(v[0], v[1])
    }
}

/// A finitely supported probability measure, kept in canonical form:
/// positions sorted ascending, duplicates (within [`POSITION_MERGE_TOL`])
/// merged, zero-weight atoms dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    space: PhaseSpace,
    positions: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(space: PhaseSpace, positions: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        space.validate()?;
        if positions.len() != weights.len() {
            return Err(Error::invalid("weights", "support and weights lengths differ"));
        }
        if positions.is_empty() {
            return Err(Error::invalid("support", "a probability measure needs at least one atom"));
        }
        let mut mass = 0.0;
        for &w in &weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::invalid("weights", "weights must be finite and nonnegative"));
            }
            mass += w;
        }
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(
                "weights",
                format!("weights sum to {mass}, expected 1 within {MASS_TOL:e}"),
            ));
        }
        let positions = positions
            .into_iter()
            .map(|x| space.normalize_point(x))
            .collect::<Result<Vec<_>>>()?;
        let (positions, weights) = canonicalize(positions, weights);
        Ok(DiscreteMeasure { space, positions, weights })
    }

    /// Dirac mass at `x`.
    pub fn dirac(space: PhaseSpace, x: f64) -> Result<Self> {
        DiscreteMeasure::new(space, vec![x], vec![1.0])
    }

    /// Equal weights on a `k`-point grid: the discretization of the uniform
    /// (Lebesgue) measure used as terminal data for backward propagation. On
    /// a finite set the grid is the label set itself.
    pub fn uniform_grid(space: PhaseSpace, k: usize) -> Result<Self> {
        match &space {
            PhaseSpace::Interval { lo, hi } => {
                let step = (hi - lo) / k as f64;
                let pos: Vec<f64> = (0..k).map(|j| lo + (j as f64 + 0.5) * step).collect();
                DiscreteMeasure::new(space, pos, vec![1.0 / k as f64; k])
            }
            PhaseSpace::ProjectiveLine => {
                let pos: Vec<f64> = (0..k).map(|j| j as f64 * PI / k as f64).collect();
                DiscreteMeasure::new(space, pos, vec![1.0 / k as f64; k])
            }
            PhaseSpace::FiniteSet { labels, .. } => {
                let n = labels.len();
                let pos: Vec<f64> = (0..n).map(|j| j as f64).collect();
                DiscreteMeasure::new(space, pos, vec![1.0 / n as f64; n])
            }
        }
    }

    /// Builds from unsorted raw atoms, canonicalizing and renormalizing the
    /// (assumed near-1) total mass. Used by propagation where products of
    /// float weights accumulate sub-ulp drift.
    pub(crate) fn from_raw_atoms(space: PhaseSpace, mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("support", "empty atom list"));
        }
        for (x, _) in atoms.iter_mut() {
            *x = space.normalize_point(*x)?;
        }
        let positions: Vec<f64> = atoms.iter().map(|&(x, _)| x).collect();
        let weights: Vec<f64> = atoms.iter().map(|&(_, w)| w).collect();
        let (positions, mut weights) = canonicalize(positions, weights);
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("weights", format!("raw atom mass {mass} too far from 1")));
        }
        for w in &mut weights {
            *w /= mass;
        }
        Ok(DiscreteMeasure { space, positions, weights })
    }

    pub fn space(&self) -> &PhaseSpace {
        &self.space
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Expectation of `f` under the measure, as an exact weighted sum.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.positions
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.integrate(|x| x)
    }

    /// Mass carried by a counterclockwise arc (projective line only).
    pub fn arc_mass(&self, arc: &Arc) -> Result<f64> {
        if !self.space.is_projective_line() {
            return Err(Error::SpaceMismatch);
        }
        Ok(self
            .positions
            .iter()
            .zip(&self.weights)
            .filter(|(&x, _)| arc.contains(x))
            .map(|(_, &w)| w)
            .sum())
    }

    /// Structural equality of canonical forms.
    pub fn same_canonical(&self, other: &DiscreteMeasure) -> bool {
        self.space == other.space
            && self.positions == other.positions
            && self.weights == other.weights
    }
}

fn canonicalize(positions: Vec<f64>, weights: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..positions.len()).collect();
    idx.sort_by(|&a, &b| positions[a].total_cmp(&positions[b]));
    let mut out_pos: Vec<f64> = Vec::with_capacity(positions.len());
    let mut out_w: Vec<f64> = Vec::with_capacity(positions.len());
    for i in idx {
        let (x, w) = (positions[i], weights[i]);
        if w == 0.0 {
            continue;
        }
        match out_pos.last() {
            Some(&last) if x - last <= POSITION_MERGE_TOL => {
                *out_w.last_mut().unwrap() += w;
            }
            _ => {
                out_pos.push(x);
                out_w.push(w);
            }
        }
    }
    if out_pos.is_empty() {
        // All weights were exactly zero; keep one atom so the invariant
        // "at least one atom" holds (callers validated total mass already).
        out_pos.push(positions[0]);
        out_w.push(0.0);
    }
    (out_pos, out_w)
}

/// A coupling between two discrete measures: `matrix[i][j]` is the mass moved
/// from atom `i` of `row_measure` to atom `j` of `col_measure`.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub row_measure: DiscreteMeasure,
    pub col_measure: DiscreteMeasure,
    pub matrix: Vec<Vec<f64>>,
    pub cost: f64,
}

impl TransportPlan {
    /// Checks marginals (1e-10) and cost consistency against the metric.
    pub fn validate(&self) -> Result<()> {
        let m = self.row_measure.len();
        let n = self.col_measure.len();
        if self.matrix.len() != m || self.matrix.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("plan", "matrix shape mismatch"));
        }
        for (i, row) in self.matrix.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - self.row_measure.weights()[i]).abs() > 1e-10 {
                return Err(Error::invalid("plan", format!("row {i} marginal off by {:e}", s - self.row_measure.weights()[i])));
            }
        }
        for j in 0..n {
            let s: f64 = self.matrix.iter().map(|r| r[j]).sum();
            if (s - self.col_measure.weights()[j]).abs() > 1e-10 {
                return Err(Error::invalid("plan", format!("col {j} marginal off by {:e}", s - self.col_measure.weights()[j])));
            }
        }
        let space = self.row_measure.space();
        let mut cost = 0.0;
        for i in 0..m {
            for j in 0..n {
                cost += self.matrix[i][j]
                    * space.distance(self.row_measure.positions()[i], self.col_measure.positions()[j]);
            }
        }
        if (cost - self.cost).abs() > 1e-9 {
            return Err(Error::invalid("plan", format!("stored cost {} differs from recomputed {}", self.cost, cost)));
        }
        Ok(())
    }
}

fn require_same_space(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.space() != nu.space() {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

/// Exact Wasserstein-1 distance on an interval via the CDF-difference
/// integral `∫ |F_μ(t) − F_ν(t)| dt`, which equals the transport infimum in
/// one dimension.
pub fn wasserstein_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    require_same_space(mu, nu)?;
    if !mu.space().is_interval() {
        return Err(Error::SpaceMismatch);
    }
    Ok(cdf_sweep(mu, nu, |acc, gap, g| acc + gap * g.abs()))
}

/// Shared sweep over the merged breakpoints of two measures on a line.
/// `fold(acc, segment_length, F_mu - F_nu on segment)`.
fn cdf_sweep<F: Fn(f64, f64, f64) -> f64>(mu: &DiscreteMeasure, nu: &DiscreteMeasure, fold: F) -> f64 {
    let (mp, mw) = (mu.positions(), mu.weights());
    let (np, nw) = (nu.positions(), nu.weights());
    let mut i = 0;
    let mut j = 0;
    let mut g = 0.0; // running F_mu - F_nu
    let mut acc = 0.0;
    let mut last: Option<f64> = None;
    while i < mp.len() || j < np.len() {
        let t = match (mp.get(i), np.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        if let Some(lt) = last {
            acc = fold(acc, t - lt, g);
        }
        while i < mp.len() && mp[i] == t {
            g += mw[i];
            i += 1;
        }
        while j < np.len() && np[j] == t {
            g -= nw[j];
            j += 1;
        }
        last = Some(t);
    }
    acc
}

/// Exact circular Wasserstein-1 on the projective line: minimize
/// `∫ |F_μ − F_ν − c| dt` over the shift `c`; the optimum is a weighted
/// median of the CDF difference over arc-length. Ties break toward the
/// smaller shift.
pub fn wasserstein_circle(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    require_same_space(mu, nu)?;
    if !mu.space().is_projective_line() {
        return Err(Error::SpaceMismatch);
    }
    // Segments between consecutive breakpoints, plus the wrap segment back to
    // the first breakpoint; on each, F_mu - F_nu is constant.
    let mut segments: Vec<(f64, f64)> = Vec::new(); // (length, g)
    let (mp, mw) = (mu.positions(), mu.weights());
    let (np, nw) = (nu.positions(), nu.weights());
    let mut i = 0;
    let mut j = 0;
    let mut g = 0.0;
    let mut breaks: Vec<f64> = Vec::new();
    let mut gs: Vec<f64> = Vec::new();
    while i < mp.len() || j < np.len() {
        let t = match (mp.get(i), np.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < mp.len() && mp[i] == t {
            g += mw[i];
            i += 1;
        }
        while j < np.len() && np[j] == t {
            g -= nw[j];
            j += 1;
        }
        breaks.push(t);
        gs.push(g);
    }
    let k = breaks.len();
    for idx in 0..k {
        let len = if idx + 1 < k {
            breaks[idx + 1] - breaks[idx]
        } else {
            PI - breaks[k - 1] + breaks[0]
        };
        if len > 0.0 {
            segments.push((len, gs[idx]));
        }
    }
    // Lower weighted median of g over segment length.
    let total: f64 = segments.iter().map(|&(l, _)| l).sum();
    segments.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut cum = 0.0;
    let mut shift = segments.last().map(|&(_, g)| g).unwrap_or(0.0);
    for &(l, gv) in &segments {
        cum += l;
        if cum >= total / 2.0 {
            shift = gv;
            break;
        }
    }
    Ok(segments.iter().map(|&(l, gv)| l * (gv - shift).abs()).sum())
}

/// Wasserstein-1 distance dispatched on the phase-space kind: CDF integral on
/// intervals, shifted CDF median on the projective line, exact LP on finite
/// sets.
pub fn wasserstein(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    require_same_space(mu, nu)?;
    match mu.space() {
        PhaseSpace::Interval { .. } => wasserstein_1d(mu, nu),
        PhaseSpace::ProjectiveLine => wasserstein_circle(mu, nu),
        PhaseSpace::FiniteSet { .. } => Ok(transport::wasserstein_oracle(mu, nu)?.cost),
    }
}

/// Image of `mu` under a bounded observable: a measure on `[-M, M]` with the
/// same weights at the evaluated positions. `M = max(1, sup |phi|)` over the
/// support unless a dominating bound is supplied.
pub fn pushforward_observable<F: Fn(f64) -> f64>(
    phi: F,
    mu: &DiscreteMeasure,
    m_bound: Option<f64>,
) -> Result<DiscreteMeasure> {
    let values: Vec<f64> = mu.positions().iter().map(|&x| phi(x)).collect();
    let sup = values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let m = match m_bound {
        Some(m) => {
            if m < sup {
                return Err(Error::invalid("m_bound", format!("bound {m} is below sup |phi| = {sup}")));
            }
            m.max(1.0)
        }
        None => sup.max(1.0),
    };
    DiscreteMeasure::new(PhaseSpace::interval(-m, m)?, values, mu.weights().to_vec())
}

pub use coupling::quantile_coupling;
pub use transport::wasserstein_oracle;
