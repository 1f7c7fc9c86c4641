//! Random orbit simulation and ergodic-deviation statistics.
//!
//! For a scenario with step sequence `μ_1, μ_2, …`, observable `φ`, and
//! propagated measures `ν_k`, each Monte Carlo trial draws an orbit
//! `x_k = f_k(x_{k−1})` and records the deviation
//!
//! ```text
//! D_n = (1/n) | Σ_{k=1..n} φ(x_k) − Σ_{k=1..n} ∫ φ dν_k |,   n on a dyadic grid.
//! ```
//!
//! Sums start at k = 1; the start point is excluded from both sides. The
//! exceedance probabilities `P(D_n > ε)` feed a least-squares fit of
//! `log P` against `n`, whose negative slope is the empirical
//! large-deviations rate. Everything is deterministic given the scenario
//! seed: trials use independent counter-based streams, so growing the trial
//! count or the horizon never perturbs earlier trials or orbit prefixes, and
//! results do not depend on how trials are scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Arc, DiscreteMeasure, PhaseSpace};
use crate::models::{apply_map_kind, MuSequence};
use crate::propagation::{propagate_integrals, PropagationConfig};
use crate::rng::{domain, Stream};

/// Bounded test observables, one family per phase-space kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    /// `c0 + c1·x` on an interval.
    Affine { c0: f64, c1: f64 },
    /// `Σ coeffs[i]·x^i` on an interval.
    Poly { coeffs: Vec<f64> },
    /// `cos(2πk·u)` in the normalized coordinate `u` (`(x−lo)/(hi−lo)` on an
    /// interval, `θ/π` on the projective line).
    CosK { k: u32 },
    /// Indicator of a counterclockwise arc of the projective line.
    Indicator { arc: Arc },
    /// Explicit values per label of a finite set.
    Table { values: Vec<f64> },
}

impl Observable {
    pub fn validate_on(&self, space: &PhaseSpace) -> Result<()> {
        match (self, space) {
            (Observable::Affine { c0, c1 }, PhaseSpace::Interval { .. }) => {
                if !c0.is_finite() || !c1.is_finite() {
                    return Err(Error::invalid("observable", "coefficients must be finite"));
                }
            }
            (Observable::Poly { coeffs }, PhaseSpace::Interval { .. }) => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::invalid("observable", "polynomial needs finite coefficients"));
                }
            }
            (Observable::CosK { .. }, PhaseSpace::Interval { .. })
            | (Observable::CosK { .. }, PhaseSpace::ProjectiveLine)
            | (Observable::Indicator { .. }, PhaseSpace::ProjectiveLine) => {}
            (Observable::Table { values }, PhaseSpace::FiniteSet { labels, .. }) => {
                if values.len() != labels.len() {
                    return Err(Error::invalid("observable", "table length must match label count"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("observable", "table values must be finite"));
                }
            }
            _ => {
                return Err(Error::invalid("observable", "observable kind does not fit the phase space"));
            }
        }
        Ok(())
    }

    pub fn eval(&self, space: &PhaseSpace, x: f64) -> f64 {
        match self {
            Observable::Affine { c0, c1 } => c0 + c1 * x,
            Observable::Poly { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
            }
            Observable::CosK { k } => {
                let u = match space {
                    PhaseSpace::Interval { lo, hi } => (x - lo) / (hi - lo),
                    PhaseSpace::ProjectiveLine => x / std::f64::consts::PI,
                    PhaseSpace::FiniteSet { .. } => x,
                };
                (2.0 * std::f64::consts::PI * *k as f64 * u).cos()
            }
            Observable::Indicator { arc } => {
                if arc.contains(x) {
                    1.0
                } else {
                    0.0
                }
            }
            Observable::Table { values } => values[x as usize],
        }
    }

    /// Certified bound `M = max(1, sup |φ|)` over the phase space.
    pub fn bound(&self, space: &PhaseSpace) -> f64 {
        let sup = match (self, space) {
            (Observable::Affine { c0, c1 }, PhaseSpace::Interval { lo, hi }) => {
                (c0 + c1 * lo).abs().max((c0 + c1 * hi).abs())
            }
            (Observable::Poly { coeffs }, PhaseSpace::Interval { lo, hi }) => {
                let b = lo.abs().max(hi.abs());
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c.abs() * b.powi(i as i32))
                    .sum()
            }
            (Observable::CosK { .. }, _) | (Observable::Indicator { .. }, _) => 1.0,
            (Observable::Table { values }, _) => {
                values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
            }
            _ => 1.0,
        };
        sup.max(1.0)
    }

    pub fn is_effectively_constant(&self, _space: &PhaseSpace) -> bool {
        match self {
            Observable::Affine { c1, .. } => *c1 == 0.0,
            Observable::Poly { coeffs } => coeffs.iter().skip(1).all(|&c| c == 0.0),
            Observable::CosK { k } => *k == 0,
            Observable::Indicator { arc } => arc.from == arc.to,
            Observable::Table { values } => values.windows(2).all(|w| w[0] == w[1]),
        }
    }
}

/// A full experiment description: everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub space: PhaseSpace,
    pub seq: MuSequence,
    pub nu0: DiscreteMeasure,
    pub observable: Observable,
    pub horizon: u64,
    pub trials: u64,
    pub seed: u64,
    pub epsilon: f64,
    pub start_points: Vec<f64>,
    pub propagation: PropagationConfig,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        if self.horizon < 1 {
            return Err(Error::invalid("horizon", "horizon must be at least 1"));
        }
        if self.trials < 1 {
            return Err(Error::invalid("trials", "trials must be at least 1"));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid("epsilon", "epsilon must be positive and finite"));
        }
        if self.nu0.space() != &self.space {
            return Err(Error::invalid("nu0", "initial measure lives on a different space"));
        }
        self.observable.validate_on(&self.space)?;
        self.seq.validate_on(&self.space)?;
        if self.start_points.is_empty() {
            return Err(Error::invalid("start_points", "at least one start point is required"));
        }
        for &x in &self.start_points {
            self.space.normalize_point(x).map_err(|_| {
                Error::invalid("start_points", format!("point {x} outside the phase space"))
            })?;
        }
        self.propagation.validate()?;
        Ok(())
    }

    /// Observable bound `M`; deviations obey `D_n ≤ 2M`.
    pub fn observable_bound(&self) -> f64 {
        self.observable.bound(&self.space)
    }

    /// Propagation config with the resampling stream keyed to this scenario.
    pub fn propagation_cfg(&self) -> PropagationConfig {
        PropagationConfig { seed: self.seed, ..self.propagation }
    }

    /// `∫ φ dν_k` for `k = 0..=horizon`, propagating once.
    pub fn phi_means(&self) -> Result<Vec<f64>> {
        self.validate()?;
        propagate_integrals(
            &self.seq,
            &self.nu0,
            self.horizon,
            &self.propagation_cfg(),
            |x| self.observable.eval(&self.space, x),
        )
    }

    fn start_point(&self, trial: u64) -> f64 {
        self.start_points[(trial % self.start_points.len() as u64) as usize]
    }
}

/// One random orbit `[x_0, …, x_horizon]`. The map at step `n` is drawn at
/// counter `n` of the trial stream, so prefixes are horizon-independent.
pub fn simulate_orbit(sc: &Scenario, x0: f64, trial: u64) -> Result<Vec<f64>> {
    let x0 = sc.space.normalize_point(x0)?;
    let stream = Stream::new(sc.seed, domain::TRIAL, trial);
    let view = sc.seq.view();
    let mut orbit = Vec::with_capacity(sc.horizon as usize + 1);
    orbit.push(x0);
    let mut x = x0;
    for k in 1..=sc.horizon {
        let atom = view.at(k).draw(stream.f64_at(k));
        x = apply_map_kind(&atom.map, x);
        orbit.push(x);
    }
    Ok(orbit)
}

/// Per-step deviations `D_n`, `n = 1..orbit.len()-1`, for an orbit aligned
/// with a propagated measure sequence.
pub fn ergodic_deviation(
    sc: &Scenario,
    nus: &[DiscreteMeasure],
    orbit: &[f64],
) -> Result<Vec<f64>> {
    if nus.len() != orbit.len() || orbit.len() < 2 {
        return Err(Error::invalid("nus", "measure sequence and orbit lengths differ"));
    }
    let phi = |x: f64| sc.observable.eval(&sc.space, x);
    let mut orbit_sum = 0.0;
    let mut mean_sum = 0.0;
    let mut out = Vec::with_capacity(orbit.len() - 1);
    for k in 1..orbit.len() {
        orbit_sum += phi(orbit[k]);
        mean_sum += nus[k].integrate(phi);
        out.push((orbit_sum - mean_sum).abs() / k as f64);
    }
    Ok(out)
}

/// Dyadic grid `{64, 128, …, 2^⌊log2 horizon⌋}`; just `{horizon}` for short
/// runs. Evenly spaced on the log axis the rate fit uses.
pub fn default_n_grid(horizon: u64) -> Vec<u64> {
    if horizon < 64 {
        return vec![horizon];
    }
    let mut out = Vec::new();
    let mut n = 64u64;
    while n <= horizon {
        out.push(n);
        n *= 2;
    }
    out
}

/// Deviation statistics across trials at the grid points.
#[derive(Debug, Clone)]
pub struct DeviationSeries {
    pub n_grid: Vec<u64>,
    pub epsilon: f64,
    /// `per_trial[t][g]` = D_{n_grid[g]} in trial `t`.
    pub per_trial: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub q05: Vec<f64>,
    pub q50: Vec<f64>,
    pub q95: Vec<f64>,
    pub exceed_prob: Vec<f64>,
}

impl DeviationSeries {
    /// Aggregate rows: `n,mean_D,q05,q50,q95,exceed_prob`.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("n,mean_D,q05,q50,q95,exceed_prob\n");
        for (g, &n) in self.n_grid.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                n, self.mean[g], self.q05[g], self.q50[g], self.q95[g], self.exceed_prob[g]
            ));
        }
        s
    }

    /// Per-trial rows: `trial,d_<n>...` — these rows are stable under trial
    /// count growth.
    pub fn per_trial_csv(&self) -> String {
        let mut s = String::from("trial");
        for n in &self.n_grid {
            s.push_str(&format!(",d_{n}"));
        }
        s.push('\n');
        for (t, row) in self.per_trial.iter().enumerate() {
            s.push_str(&t.to_string());
            for d in row {
                s.push_str(&format!(",{d}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Nearest-rank quantile of a sorted slice.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let t = sorted.len();
    let idx = ((p * t as f64).ceil() as usize).max(1).min(t) - 1;
    sorted[idx]
}

/// Runs all trials and collects `D_n` at the grid points. Trials execute in
/// parallel; rows are merged in trial order, so output is independent of
/// scheduling.
pub fn run_deviation_series(
    sc: &Scenario,
    phi_means: &[f64],
    n_grid: &[u64],
) -> Result<DeviationSeries> {
    sc.validate()?;
    if phi_means.len() != sc.horizon as usize + 1 {
        return Err(Error::invalid("phi_means", "length must be horizon + 1"));
    }
    if n_grid.is_empty()
        || n_grid.windows(2).any(|w| w[0] >= w[1])
        || *n_grid.last().unwrap() > sc.horizon
        || n_grid[0] < 1
    {
        return Err(Error::invalid("n_grid", "grid must be increasing within [1, horizon]"));
    }
    // Prefix sums of the deterministic side, shared read-only by all trials.
    let mut prefix = vec![0.0; sc.horizon as usize + 1];
    for k in 1..=sc.horizon as usize {
        prefix[k] = prefix[k - 1] + phi_means[k];
    }
    let n_max = *n_grid.last().unwrap();
    let m_bound = sc.observable_bound();

    let per_trial: Vec<Vec<f64>> = (0..sc.trials)
        .into_par_iter()
        .map(|t| {
            let stream = Stream::new(sc.seed, domain::TRIAL, t);
            let view = sc.seq.view();
            let mut x = sc
                .space
                .normalize_point(sc.start_point(t))
                .expect("validated start point");
            let mut orbit_sum = 0.0;
            let mut row = Vec::with_capacity(n_grid.len());
            let mut g = 0;
            for k in 1..=n_max {
                let atom = view.at(k).draw(stream.f64_at(k));
                x = apply_map_kind(&atom.map, x);
                orbit_sum += sc.observable.eval(&sc.space, x);
                if n_grid[g] == k {
                    let d = (orbit_sum - prefix[k as usize]).abs() / k as f64;
                    debug_assert!(d <= 2.0 * m_bound + 1e-9);
                    row.push(d);
                    g += 1;
                    if g == n_grid.len() {
                        break;
                    }
                }
            }
            row
        })
        .collect();

    let trials = per_trial.len();
    let mut mean = Vec::with_capacity(n_grid.len());
    let mut q05 = Vec::with_capacity(n_grid.len());
    let mut q50 = Vec::with_capacity(n_grid.len());
    let mut q95 = Vec::with_capacity(n_grid.len());
    let mut exceed = Vec::with_capacity(n_grid.len());
    for g in 0..n_grid.len() {
        let mut col: Vec<f64> = per_trial.iter().map(|row| row[g]).collect();
        mean.push(col.iter().sum::<f64>() / trials as f64);
        exceed.push(col.iter().filter(|&&d| d > sc.epsilon).count() as f64 / trials as f64);
        col.sort_by(f64::total_cmp);
        q05.push(quantile_sorted(&col, 0.05));
        q50.push(quantile_sorted(&col, 0.50));
        q95.push(quantile_sorted(&col, 0.95));
    }
    Ok(DeviationSeries {
        n_grid: n_grid.to_vec(),
        epsilon: sc.epsilon,
        per_trial,
        mean,
        q05,
        q50,
        q95,
        exceed_prob: exceed,
    })
}

/// Grid points with fewer exceedances than this are censored out of the rate
/// fit: the log of a tiny empirical probability is noise-dominated.
pub const LD_MIN_EXCEEDANCES: u64 = 5;

/// Least-squares fit of `log P(D_n > ε)` against `n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LdFit {
    pub epsilon: f64,
    pub n_grid: Vec<u64>,
    pub exceed_count: Vec<u64>,
    pub exceed_prob: Vec<f64>,
    /// Which grid points entered the fit (count >= LD_MIN_EXCEEDANCES).
    pub used: Vec<bool>,
    /// Slope of log P versus n; a negative slope is the empirical decay rate.
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; None when fewer than 3 points were fit
    /// (the residual estimate is undefined there).
    pub slope_se: Option<f64>,
}

/// Fits the exponential-decay model to the exceedance probabilities of a
/// deviation series.
pub fn ld_fit_from_series(series: &DeviationSeries) -> Result<LdFit> {
    let trials = series.per_trial.len() as u64;
    let mut counts = Vec::with_capacity(series.n_grid.len());
    for g in 0..series.n_grid.len() {
        let c = series
            .per_trial
            .iter()
            .filter(|row| row[g] > series.epsilon)
            .count() as u64;
        counts.push(c);
    }
    let used: Vec<bool> = counts.iter().map(|&c| c >= LD_MIN_EXCEEDANCES).collect();
    let pts: Vec<(f64, f64)> = series
        .n_grid
        .iter()
        .zip(&counts)
        .zip(&used)
        .filter(|(_, &u)| u)
        .map(|((&n, &c), _)| (n as f64, (c as f64 / trials as f64).ln()))
        .collect();
    if pts.is_empty() {
        return Err(Error::NoExceedances);
    }
    if pts.len() < 2 {
        return Err(Error::invalid(
            "n_grid",
            "fewer than two uncensored grid points; increase trials or decrease epsilon",
        ));
    }
    let k = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = k * sxx - sx * sx;
    let slope = (k * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / k;
    let slope_se = if pts.len() >= 3 {
        let ssr: f64 = pts
            .iter()
            .map(|&(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        let var = ssr / (k - 2.0) / (sxx - sx * sx / k);
        Some(var.sqrt())
    } else {
        None
    };
    Ok(LdFit {
        epsilon: series.epsilon,
        n_grid: series.n_grid.clone(),
        exceed_count: counts,
        exceed_prob: series.exceed_prob.clone(),
        used,
        slope,
        intercept,
        slope_se,
    })
}

/// Runs the trials and fits the decay rate in one call. Requires at least
/// 100 trials for the empirical probabilities to mean anything.
pub fn ld_estimate(sc: &Scenario, phi_means: &[f64], n_grid: &[u64]) -> Result<LdFit> {
    if sc.trials < 100 {
        return Err(Error::invalid("trials", "rate estimation needs at least 100 trials"));
    }
    let series = run_deviation_series(sc, phi_means, n_grid)?;
    ld_fit_from_series(&series)
}

/// Empirical probability that a shared random composition brings `x` and `y`
/// within `epsilon`, for every length `m = 1..=m_max`. One map sequence per
/// trial is applied to both points.
pub fn two_point_profile(
    seq: &MuSequence,
    space: &PhaseSpace,
    x: f64,
    y: f64,
    m_max: u64,
    trials: u64,
    seed: u64,
    epsilon: f64,
) -> Result<Vec<f64>> {
    seq.validate_on(space)?;
    if m_max < 1 || trials < 1 {
        return Err(Error::invalid("m_max", "m_max and trials must be positive"));
    }
    let x = space.normalize_point(x)?;
    let y = space.normalize_point(y)?;
    let counts: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let stream = Stream::new(seed, domain::TRIAL, t);
            let view = seq.view();
            let mut xi = x;
            let mut yi = y;
            let mut hits = vec![0u64; m_max as usize];
            for k in 1..=m_max {
                let atom = view.at(k).draw(stream.f64_at(k));
                xi = apply_map_kind(&atom.map, xi);
                yi = apply_map_kind(&atom.map, yi);
                if space.distance(xi, yi) < epsilon {
                    hits[k as usize - 1] = 1;
                }
            }
            hits
        })
        .reduce(
            || vec![0u64; m_max as usize],
            |mut a, b| {
                for (ai, bi) in a.iter_mut().zip(b) {
                    *ai += bi;
                }
                a
            },
        );
    Ok(counts.iter().map(|&c| c as f64 / trials as f64).collect())
}

/// Probability that the composition of `m` shared random maps brings `x` and
/// `y` within `epsilon`.
pub fn two_point_contraction(
    seq: &MuSequence,
    space: &PhaseSpace,
    x: f64,
    y: f64,
    m: u64,
    trials: u64,
    seed: u64,
    epsilon: f64,
) -> Result<f64> {
    Ok(*two_point_profile(seq, space, x, y, m, trials, seed, epsilon)?
        .last()
        .unwrap())
}
