//! Concrete map families and per-step distributions.
//!
//! Four map kinds, one per phase-space kind plus the deterministic rotation
//! used by the counterexamples:
//!
//! - `Affine(a, b)`: `x ↦ ax + b` on an interval; with `|a| ≤ λ < 1` these are
//!   the contractions of a random iterated function system,
//! - `Moebius(A)`: the projective action of `A ∈ SL(2, ℝ)` on `ℝP¹`,
//!   `θ ↦ angle(A · (cos θ, sin θ)) mod π`,
//! - `Permutation(table)`: a bijection of a finite label set,
//! - `Rotation(alpha)`: the circle rotation by `alpha` full turns, acting on
//!   the projective-line angle coordinate (`u ↦ u + alpha mod 1` in normalized
//!   coordinates `u = θ/π`).
//!
//! A [`MapDistribution`] is one step's finite list of `(map, probability)`
//! atoms; a [`MuSequence`] generates the step-indexed sequence of such
//! distributions.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::measures::{Arc, PhaseSpace};

/// Determinant tolerance for SL(2, ℝ) membership.
pub const DET_TOL: f64 = 1e-10;

/// A 2x2 real matrix with determinant 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[[f64; 2]; 2]", try_from = "[[f64; 2]; 2]")]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let m = Mat2 { a, b, c, d };
        let det = m.det();
        if !det.is_finite() || (det - 1.0).abs() > DET_TOL {
            return Err(Error::invalid("matrix", format!("determinant {det} is not 1 within {DET_TOL:e}")));
        }
        Ok(m)
    }

    pub fn identity() -> Self {
        Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    /// Planar rotation by `t` radians (elliptic unless `t ≡ 0 mod π`).
    pub fn rotation(t: f64) -> Self {
        let (s, c) = t.sin_cos();
        Mat2 { a: c, b: -s, c: s, d: c }
    }

    /// Hyperbolic diagonal `diag(l, 1/l)`.
    pub fn diagonal(l: f64) -> Result<Self> {
        if l == 0.0 || !l.is_finite() {
            return Err(Error::invalid("matrix", "diagonal entry must be nonzero and finite"));
        }
        Ok(Mat2 { a: l, b: 0.0, c: 0.0, d: 1.0 / l })
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Matrix product `self * rhs`. Not revalidated: products of SL(2, ℝ)
    /// matrices stay in SL(2, ℝ) up to rounding, tracked by the invariant
    /// tests on [`NormalizedProduct`].
    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    pub fn inverse(&self) -> Mat2 {
        Mat2 { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// Action on the projective line: the angle of `A · (cos θ, sin θ)`
    /// reduced mod π. `SL(2, ℝ)` never sends a direction to zero.
    pub fn angle_image(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let x = self.a * c + self.b * s;
        let y = self.c * c + self.d * s;
        let mut phi = y.atan2(x);
        if phi < 0.0 {
            phi += PI;
        }
        if phi >= PI {
            phi -= PI;
        }
        phi
    }

    /// True when the matrix is ±identity, i.e. acts trivially on ℝP¹.
    pub fn is_scalar(&self) -> bool {
        self.b.abs() <= 1e-12 && self.c.abs() <= 1e-12 && (self.a - self.d).abs() <= 1e-12
    }

    /// Angles in `[0, π)` of the real invariant directions (eigenvectors).
    /// Empty for elliptic matrices; every direction for scalar ones (which
    /// report none here — callers check [`Mat2::is_scalar`] first).
    pub fn eigen_angles(&self) -> Vec<f64> {
        if self.is_scalar() {
            return Vec::new();
        }
        let mut out = Vec::new();
        // Directions v = (cos θ, sin θ) with A v ∥ v satisfy, in t = tan θ:
        //   b t^2 + (a − d) t − c = 0,
        // plus θ = π/2 exactly when b = 0.
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        if b.abs() <= 1e-14 {
            out.push(PI / 2.0);
            if (a - d).abs() > 1e-14 {
                out.push((c / (a - d)).atan().rem_euclid(PI));
            }
        } else {
            let disc = (a - d) * (a - d) + 4.0 * b * c;
            if disc >= 0.0 {
                let r = disc.sqrt();
                for t in [(-(a - d) + r) / (2.0 * b), (-(a - d) - r) / (2.0 * b)] {
                    out.push(t.atan().rem_euclid(PI));
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
        out
    }
}

impl From<Mat2> for [[f64; 2]; 2] {
    fn from(m: Mat2) -> Self {
        [[m.a, m.b], [m.c, m.d]]
    }
}

impl TryFrom<[[f64; 2]; 2]> for Mat2 {
    type Error = Error;
    fn try_from(v: [[f64; 2]; 2]) -> Result<Self> {
        Mat2::new(v[0][0], v[0][1], v[1][0], v[1][1])
    }
}

/// Running matrix product with overflow protection: after each factor the
/// entries are divided by the largest magnitude and the log of the scale is
/// accumulated separately. The projective action is scale invariant, so
/// [`NormalizedProduct::angle_image`] is unaffected, while `log_norm` exposes
/// the growth rate `log ‖A_n ⋯ A_1‖`.
#[derive(Debug, Clone, Copy)]
pub struct NormalizedProduct {
    e: [f64; 4],
    log_scale: f64,
}

impl NormalizedProduct {
    pub fn identity() -> Self {
        NormalizedProduct { e: [1.0, 0.0, 0.0, 1.0], log_scale: 0.0 }
    }

    /// Replaces the product `P` by `M · P`.
    pub fn left_mul(&mut self, m: &Mat2) {
        let [a, b, c, d] = self.e;
        let mut e = [
            m.a * a + m.b * c,
            m.a * b + m.b * d,
            m.c * a + m.d * c,
            m.c * b + m.d * d,
        ];
        let s = e.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        if s > 0.0 {
            for v in &mut e {
                *v /= s;
            }
            self.log_scale += s.ln();
        }
        self.e = e;
    }

    /// `log` of the max-entry norm of the underlying (unscaled) product.
    pub fn log_norm(&self) -> f64 {
        let m = self.e.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        self.log_scale + m.ln()
    }

    /// `|log det + 2·log scale|` of the underlying product; 0 for an exact
    /// SL(2, ℝ) product. The stored determinant is `exp(-2·log_scale)`, so
    /// the defect is only resolvable while `log_scale` stays below ~10 —
    /// beyond that the entry-level subtraction noise (~1e-16 absolute)
    /// swamps it. Norm growth and projective accuracy are what the
    /// renormalization protects at long lengths.
    pub fn log_det_defect(&self) -> f64 {
        let det = self.e[0] * self.e[3] - self.e[1] * self.e[2];
        (det.abs().ln() + 2.0 * self.log_scale).abs()
    }

    pub fn angle_image(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let x = self.e[0] * c + self.e[1] * s;
        let y = self.e[2] * c + self.e[3] * s;
        let mut phi = y.atan2(x);
        if phi < 0.0 {
            phi += PI;
        }
        if phi >= PI {
            phi -= PI;
        }
        phi
    }
}

/// One map, without its probability.
#[derive(Debug, Clone, PartialEq)]
pub enum MapKind {
    Affine { a: f64, b: f64 },
    Moebius(Mat2),
    Permutation(Vec<usize>),
    Rotation { alpha: f64 },
}

impl MapKind {
    /// Inverse map, when the kind is a bijection of its phase space.
    pub fn inverse(&self) -> Result<MapKind> {
        match self {
            MapKind::Affine { .. } => Err(Error::NotInvertible(
                "affine interval maps are not bijections of the interval".to_string(),
            )),
            MapKind::Moebius(m) => Ok(MapKind::Moebius(m.inverse())),
            MapKind::Permutation(t) => {
                let mut inv = vec![0; t.len()];
                for (i, &j) in t.iter().enumerate() {
                    inv[j] = i;
                }
                Ok(MapKind::Permutation(inv))
            }
            MapKind::Rotation { alpha } => Ok(MapKind::Rotation { alpha: -alpha }),
        }
    }

    /// Image of a counterclockwise arc under an orientation-preserving map of
    /// ℝP¹ (Moebius and rotation kinds only).
    pub fn map_arc(&self, arc: &Arc) -> Result<Arc> {
        match self {
            MapKind::Moebius(_) | MapKind::Rotation { .. } => Arc::new(
                apply_map_kind(self, arc.from),
                apply_map_kind(self, arc.to),
            ),
            _ => Err(Error::invalid("map", "arcs only transform under projective-line maps")),
        }
    }

    fn space_compatible(&self, space: &PhaseSpace) -> bool {
        matches!(
            (self, space),
            (MapKind::Affine { .. }, PhaseSpace::Interval { .. })
                | (MapKind::Moebius(_), PhaseSpace::ProjectiveLine)
                | (MapKind::Rotation { .. }, PhaseSpace::ProjectiveLine)
                | (MapKind::Permutation(_), PhaseSpace::FiniteSet { .. })
        )
    }
}

/// Evaluates a map at a point of its phase space.
pub fn apply_map_kind(map: &MapKind, x: f64) -> f64 {
    match map {
        MapKind::Affine { a, b } => a * x + b,
        MapKind::Moebius(m) => m.angle_image(x),
        MapKind::Permutation(t) => t[x as usize] as f64,
        // alpha is in full turns; the circle has circumference π in the
        // angle coordinate.
        MapKind::Rotation { alpha } => (x + alpha * PI).rem_euclid(PI),
    }
}

/// One `(map, probability)` atom of a step distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "AtomRepr", try_from = "AtomRepr")]
pub struct MapAtom {
    pub map: MapKind,
    pub prob: f64,
}

impl MapAtom {
    pub fn new(map: MapKind, prob: f64) -> Result<Self> {
        if !prob.is_finite() || prob < 0.0 {
            return Err(Error::invalid("p", "atom probability must be finite and nonnegative"));
        }
        Ok(MapAtom { map, prob })
    }
}

/// Evaluates an atom's map at `x`.
pub fn apply_map(atom: &MapAtom, x: f64) -> f64 {
    apply_map_kind(&atom.map, x)
}

/// Wire format for map atoms.
#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum AtomRepr {
    Affine { a: f64, b: f64, p: f64 },
    Moebius { m: [[f64; 2]; 2], p: f64 },
    Permutation { table: Vec<usize>, p: f64 },
    Rotation { alpha: f64, p: f64 },
}

impl From<MapAtom> for AtomRepr {
    fn from(atom: MapAtom) -> Self {
        match atom.map {
            MapKind::Affine { a, b } => AtomRepr::Affine { a, b, p: atom.prob },
            MapKind::Moebius(m) => AtomRepr::Moebius { m: m.into(), p: atom.prob },
            MapKind::Permutation(table) => AtomRepr::Permutation { table, p: atom.prob },
            MapKind::Rotation { alpha } => AtomRepr::Rotation { alpha, p: atom.prob },
        }
    }
}

impl TryFrom<AtomRepr> for MapAtom {
    type Error = Error;
    fn try_from(r: AtomRepr) -> Result<Self> {
        match r {
            AtomRepr::Affine { a, b, p } => MapAtom::new(MapKind::Affine { a, b }, p),
            AtomRepr::Moebius { m, p } => MapAtom::new(MapKind::Moebius(Mat2::try_from(m)?), p),
            AtomRepr::Permutation { table, p } => {
                MapAtom::new(MapKind::Permutation(table), p)
            }
            AtomRepr::Rotation { alpha, p } => MapAtom::new(MapKind::Rotation { alpha }, p),
        }
    }
}

/// One step's distribution over maps: a finite list of atoms whose
/// probabilities sum to 1 and which all act on the same phase-space kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<MapAtom>", try_from = "Vec<MapAtom>")]
pub struct MapDistribution {
    atoms: Vec<MapAtom>,
}

impl MapDistribution {
    pub fn new(atoms: Vec<MapAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("atoms", "a step distribution needs at least one atom"));
        }
        let mass: f64 = atoms.iter().map(|a| a.prob).sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("atoms", format!("probabilities sum to {mass}, expected 1 within 1e-12")));
        }
        let same_kind = atoms.windows(2).all(|w| {
            std::mem::discriminant(&kind_class(&w[0].map)) == std::mem::discriminant(&kind_class(&w[1].map))
        });
        if !same_kind {
            return Err(Error::invalid("atoms", "all atoms must act on the same phase-space kind"));
        }
        Ok(MapDistribution { atoms })
    }

    pub fn atoms(&self) -> &[MapAtom] {
        &self.atoms
    }

    /// Inverse-CDF draw over atoms in declaration order: the first atom whose
    /// cumulative probability exceeds `u`.
    pub fn draw(&self, u: f64) -> &MapAtom {
        let mut cum = 0.0;
        for atom in &self.atoms {
            cum += atom.prob;
            if cum > u {
                return atom;
            }
        }
        self.atoms.last().unwrap()
    }

    /// Checks that every atom is a well-formed endomorphism of `space`.
    pub fn validate_on(&self, space: &PhaseSpace) -> Result<()> {
        for atom in &self.atoms {
            if !atom.map.space_compatible(space) {
                return Err(Error::SpaceMismatch);
            }
            match (&atom.map, space) {
                (MapKind::Affine { a, b }, PhaseSpace::Interval { lo, hi }) => {
                    if a.abs() > 1.0 + 1e-12 {
                        return Err(Error::invalid("atoms", format!("affine slope {a} expands the interval")));
                    }
                    let (p, q) = (a * lo + b, a * hi + b);
                    let (img_lo, img_hi) = (p.min(q), p.max(q));
                    if img_lo < lo - 1e-9 || img_hi > hi + 1e-9 {
                        return Err(Error::invalid(
                            "atoms",
                            format!("affine map image [{img_lo}, {img_hi}] leaves [{lo}, {hi}]"),
                        ));
                    }
                }
                (MapKind::Permutation(t), PhaseSpace::FiniteSet { labels, .. }) => {
                    let n = labels.len();
                    if t.len() != n {
                        return Err(Error::invalid("atoms", "permutation table length must match label count"));
                    }
                    let mut seen = vec![false; n];
                    for &j in t {
                        if j >= n || seen[j] {
                            return Err(Error::invalid("atoms", "permutation table is not a bijection"));
                        }
                        seen[j] = true;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Pushes every atom through inversion; probabilities are unchanged.
    pub fn inverse(&self) -> Result<MapDistribution> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Ok(MapAtom { map: a.map.inverse()?, prob: a.prob }))
            .collect::<Result<Vec<_>>>()?;
        MapDistribution::new(atoms)
    }
}

impl From<MapDistribution> for Vec<MapAtom> {
    fn from(d: MapDistribution) -> Self {
        d.atoms
    }
}

impl TryFrom<Vec<MapAtom>> for MapDistribution {
    type Error = Error;
    fn try_from(atoms: Vec<MapAtom>) -> Result<Self> {
        MapDistribution::new(atoms)
    }
}

// Coarse kind class used for the same-kind check (Moebius and Rotation both
// act on the projective line).
enum KindClass {
    Interval,
    Projective,
    Finite,
}

fn kind_class(m: &MapKind) -> KindClass {
    match m {
        MapKind::Affine { .. } => KindClass::Interval,
        MapKind::Moebius(_) | MapKind::Rotation { .. } => KindClass::Projective,
        MapKind::Permutation(_) => KindClass::Finite,
    }
}

/// The two-map contraction family generating the middle-thirds Cantor set:
/// `x ↦ x/3` with probability `p` and `x ↦ x/3 + 2/3` with probability
/// `1 − p`. Lipschitz constant 1/3.
pub fn cantor_ifs(p: f64) -> Result<MapDistribution> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", format!("probability {p} outside [0, 1]")));
    }
    MapDistribution::new(vec![
        MapAtom::new(MapKind::Affine { a: 1.0 / 3.0, b: 0.0 }, p)?,
        MapAtom::new(MapKind::Affine { a: 1.0 / 3.0, b: 2.0 / 3.0 }, 1.0 - p)?,
    ])
}

/// Generator for the step-indexed sequence of map distributions. Steps are
/// 1-based: `dist_at(n)` is the law of the n-th map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MuSequence {
    Constant { dist: MapDistribution },
    Periodic { phases: Vec<MapDistribution> },
    Scripted { steps: Vec<MapDistribution>, default: MapDistribution },
    /// Two-point system: identity at every step except the listed shuffle
    /// times, where id and the transposition are drawn with probability 1/2
    /// each.
    TwoPointSparse { shuffle_times: Vec<u64> },
}

impl MuSequence {
    pub fn validate(&self) -> Result<()> {
        match self {
            MuSequence::Constant { .. } => Ok(()),
            MuSequence::Periodic { phases } => {
                if phases.is_empty() {
                    return Err(Error::invalid("mu_sequence", "periodic sequence needs at least one phase"));
                }
                Ok(())
            }
            MuSequence::Scripted { .. } => Ok(()),
            MuSequence::TwoPointSparse { shuffle_times } => {
                if shuffle_times.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid("mu_sequence", "shuffle times must be strictly increasing"));
                }
                if shuffle_times.first() == Some(&0) {
                    return Err(Error::invalid("mu_sequence", "shuffle times are 1-based"));
                }
                Ok(())
            }
        }
    }

    pub fn validate_on(&self, space: &PhaseSpace) -> Result<()> {
        self.validate()?;
        match self {
            MuSequence::Constant { dist } => dist.validate_on(space),
            MuSequence::Periodic { phases } => {
                phases.iter().try_for_each(|d| d.validate_on(space))
            }
            MuSequence::Scripted { steps, default } => {
                steps.iter().try_for_each(|d| d.validate_on(space))?;
                default.validate_on(space)
            }
            MuSequence::TwoPointSparse { .. } => match space {
                PhaseSpace::FiniteSet { labels, .. } if labels.len() == 2 => Ok(()),
                _ => Err(Error::SpaceMismatch),
            },
        }
    }

    /// Step distribution at 1-based index `n`. Deterministic: the same index
    /// always yields the same distribution.
    pub fn dist_at(&self, n: u64) -> MapDistribution {
        self.view().at(n).clone()
    }

    /// Zero-allocation per-step resolver for hot loops.
    pub fn view(&self) -> SeqView<'_> {
        SeqView {
            seq: self,
            tp_calm: MapDistribution::new(vec![MapAtom {
                map: MapKind::Permutation(vec![0, 1]),
                prob: 1.0,
            }])
            .unwrap(),
            tp_shuffle: MapDistribution::new(vec![
                MapAtom { map: MapKind::Permutation(vec![0, 1]), prob: 0.5 },
                MapAtom { map: MapKind::Permutation(vec![1, 0]), prob: 0.5 },
            ])
            .unwrap(),
        }
    }

    /// Default sparse shuffle schedule `n_k = 2^(k²)`, `k = 1..=kmax`. The
    /// ratio `(n_{k+1} − n_k)/n_k` diverges, which is what makes the slow
    /// diffusion example defeat time averaging.
    pub fn two_point_sparse_schedule(kmax: u32) -> Result<Vec<u64>> {
        if !(1..=7).contains(&kmax) {
            return Err(Error::invalid("kmax", "schedule supports 1 <= kmax <= 7"));
        }
        Ok((1..=kmax).map(|k| 1u64 << (k * k)).collect())
    }
}

/// Borrowing resolver returned by [`MuSequence::view`].
pub struct SeqView<'a> {
    seq: &'a MuSequence,
    tp_calm: MapDistribution,
    tp_shuffle: MapDistribution,
}

impl SeqView<'_> {
    pub fn at(&self, n: u64) -> &MapDistribution {
        match self.seq {
            MuSequence::Constant { dist } => dist,
            MuSequence::Periodic { phases } => {
                &phases[((n - 1) % phases.len() as u64) as usize]
            }
            MuSequence::Scripted { steps, default } => steps
                .get((n - 1) as usize)
                .unwrap_or(default),
            MuSequence::TwoPointSparse { shuffle_times } => {
                if shuffle_times.binary_search(&n).is_ok() {
                    &self.tp_shuffle
                } else {
                    &self.tp_calm
                }
            }
        }
    }
}

/// Outcome of the invariant-pair falsifier for the measures condition on
/// `SL(2, ℝ)` step distributions.
///
/// The measures condition asks that no pair of probability measures
/// `(ν₁, ν₂)` on ℝP¹ satisfies `(f_A)_* ν₁ = ν₂` for every `A` in the
/// support. Verifying it in full generality is not algorithmic; this check
/// rules out the finite obstructions realizable by atomic `ν₁, ν₂` with at
/// most two atoms. `PassNecessary` is therefore necessary evidence, not a
/// proof.
#[derive(Debug, Clone, PartialEq)]
pub enum FalsifierVerdict {
    PassNecessary,
    Fail(FalsifierWitness),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FalsifierWitness {
    /// Every atom acts as the identity on ℝP¹: every measure is invariant.
    EveryMeasureInvariant,
    /// All atoms fix this direction.
    CommonFixedPoint(f64),
    /// All atoms map the source pair onto the same target pair.
    InvariantPair { source: [f64; 2], target: [f64; 2] },
}

/// Candidate cap for the eigen-direction search.
const FALSIFIER_CANDIDATE_CAP: usize = 50;
const FALSIFIER_TOL: f64 = 1e-9;

/// Finite necessary-condition check for the measures condition.
///
/// Candidates are the real eigen-directions of every atom and of pairwise
/// products (capped at [`FALSIFIER_CANDIDATE_CAP`]); the check fails on a
/// common fixed direction or a common invariant direction pair.
pub fn measures_condition_falsifier(dist: &MapDistribution) -> Result<FalsifierVerdict> {
    let mats: Vec<Mat2> = dist
        .atoms()
        .iter()
        .map(|a| match &a.map {
            MapKind::Moebius(m) => Ok(*m),
            _ => Err(Error::invalid("atoms", "falsifier requires moebius atoms only")),
        })
        .collect::<Result<Vec<_>>>()?;

    let active: Vec<Mat2> = mats.iter().copied().filter(|m| !m.is_scalar()).collect();
    if active.is_empty() {
        return Ok(FalsifierVerdict::Fail(FalsifierWitness::EveryMeasureInvariant));
    }

    let mut candidates: Vec<f64> = Vec::new();
    for m in &active {
        candidates.extend(m.eigen_angles());
    }
    for x in &active {
        for y in &active {
            if candidates.len() >= FALSIFIER_CANDIDATE_CAP {
                break;
            }
            let p = x.mul(y);
            if !p.is_scalar() {
                candidates.extend(p.eigen_angles());
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup_by(|a, b| (*a - *b).abs() < FALSIFIER_TOL);
    candidates.truncate(FALSIFIER_CANDIDATE_CAP);

    let sp = PhaseSpace::projective_line();

    // (i) a direction fixed by every atom.
    for &theta in &candidates {
        if mats
            .iter()
            .all(|m| sp.distance(m.angle_image(theta), theta) <= FALSIFIER_TOL)
        {
            return Ok(FalsifierVerdict::Fail(FalsifierWitness::CommonFixedPoint(theta)));
        }
    }

    // (ii) a two-direction set mapped to one common target set by every atom.
    for i in 0..candidates.len() {
        for j in (i + 1)..candidates.len() {
            let (p, q) = (candidates[i], candidates[j]);
            if sp.distance(p, q) <= FALSIFIER_TOL {
                continue;
            }
            let t0 = [mats[0].angle_image(p), mats[0].angle_image(q)];
            let matches_target = |m: &Mat2| {
                let ip = m.angle_image(p);
                let iq = m.angle_image(q);
                let direct = sp.distance(ip, t0[0]) <= FALSIFIER_TOL
                    && sp.distance(iq, t0[1]) <= FALSIFIER_TOL;
                let swapped = sp.distance(ip, t0[1]) <= FALSIFIER_TOL
                    && sp.distance(iq, t0[0]) <= FALSIFIER_TOL;
                direct || swapped
            };
            if mats.iter().all(|m| matches_target(m)) {
                return Ok(FalsifierVerdict::Fail(FalsifierWitness::InvariantPair {
                    source: [p, q],
                    target: t0,
                }));
            }
        }
    }

    Ok(FalsifierVerdict::PassNecessary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, Stream};

    #[test]
    fn affine_map_examples() {
        let third = MapKind::Affine { a: 1.0 / 3.0, b: 0.0 };
        assert!((apply_map_kind(&third, 0.9) - 0.3).abs() < 1e-15);
        let upper = MapKind::Affine { a: 1.0 / 3.0, b: 2.0 / 3.0 };
        assert!((apply_map_kind(&upper, 0.0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn moebius_identity_fixes_angles() {
        let id = MapKind::Moebius(Mat2::identity());
        for theta in [0.0, 0.7, 1.5, 3.0] {
            assert!((apply_map_kind(&id, theta) - theta).abs() < 1e-12);
        }
    }

    #[test]
    fn moebius_inverse_is_a_homeomorphism_inverse() {
        let stream = Stream::new(5150, domain::PROBES, 0);
        for trial in 0..200u64 {
            let t1 = stream.f64_at(trial * 4) * PI;
            let l = 0.5 + 2.0 * stream.f64_at(trial * 4 + 1);
            let t2 = stream.f64_at(trial * 4 + 2) * PI;
            let m = Mat2::rotation(t1).mul(&Mat2::diagonal(l).unwrap()).mul(&Mat2::rotation(t2));
            let inv = m.inverse();
            let theta = stream.f64_at(trial * 4 + 3) * PI;
            let roundtrip = inv.angle_image(m.angle_image(theta));
            let sp = PhaseSpace::projective_line();
            assert!(
                sp.distance(roundtrip, theta) < 1e-9,
                "trial {trial}: {theta} -> {roundtrip}"
            );
        }
    }

    #[test]
    fn contraction_bound_is_respected() {
        // Fuzz: affine atoms with |a| <= 1/3 contract distances by >= factor 3.
        let stream = Stream::new(99, domain::PROBES, 2);
        for trial in 0..500u64 {
            let a = (stream.f64_at(trial * 5) - 0.5) * 2.0 / 3.0;
            let b = if a >= 0.0 {
                stream.f64_at(trial * 5 + 1) * (1.0 - a)
            } else {
                -a + stream.f64_at(trial * 5 + 1) * (1.0 + a)
            };
            let map = MapKind::Affine { a, b };
            let x = stream.f64_at(trial * 5 + 2);
            let y = stream.f64_at(trial * 5 + 3);
            let (fx, fy) = (apply_map_kind(&map, x), apply_map_kind(&map, y));
            assert!((fx - fy).abs() <= (x - y).abs() / 3.0 + 1e-15);
            assert!((0.0..=1.0).contains(&fx));
        }
    }

    #[test]
    fn normalized_product_preserves_unit_determinant() {
        let stream = Stream::new(31337, domain::PROBES, 3);
        let mut prod = NormalizedProduct::identity();
        for k in 0..1000u64 {
            let t = stream.f64_at(3 * k) * PI;
            let l = 1.0 + 3.0 * stream.f64_at(3 * k + 1);
            let m = Mat2::rotation(t).mul(&Mat2::diagonal(l).unwrap());
            prod.left_mul(&m);
        }
        assert!(prod.log_det_defect() < 1e-8, "defect {}", prod.log_det_defect());
        assert!(prod.log_norm() > 0.0);
    }

    #[test]
    fn cantor_ifs_examples() {
        let d = cantor_ifs(0.5).unwrap();
        assert_eq!(d.atoms().len(), 2);
        assert_eq!(d.atoms()[0].prob, 0.5);
        let degenerate = cantor_ifs(1.0).unwrap();
        assert_eq!(degenerate.atoms()[1].prob, 0.0);
        let skew = cantor_ifs(0.3).unwrap();
        assert!((skew.atoms()[0].prob - 0.3).abs() < 1e-15);
        assert!((skew.atoms()[1].prob - 0.7).abs() < 1e-15);
        assert!(cantor_ifs(1.5).is_err());
    }

    #[test]
    fn mu_sequences_are_deterministic_in_the_index() {
        let seq = MuSequence::Periodic {
            phases: vec![cantor_ifs(0.3).unwrap(), cantor_ifs(0.7).unwrap()],
        };
        for n in 1..=10 {
            assert_eq!(seq.dist_at(n), seq.dist_at(n));
        }
        assert_eq!(seq.dist_at(1), seq.dist_at(3));
        assert_ne!(seq.dist_at(1), seq.dist_at(2));
    }

    #[test]
    fn sparse_schedule_grows_as_expected() {
        assert_eq!(
            MuSequence::two_point_sparse_schedule(4).unwrap(),
            vec![2, 16, 512, 65536]
        );
        assert!(MuSequence::two_point_sparse_schedule(8).is_err());
    }

    #[test]
    fn two_point_sparse_steps() {
        let seq = MuSequence::TwoPointSparse { shuffle_times: vec![2, 16] };
        assert_eq!(seq.dist_at(1).atoms().len(), 1);
        assert_eq!(seq.dist_at(2).atoms().len(), 2);
        assert_eq!(seq.dist_at(3).atoms().len(), 1);
        assert_eq!(seq.dist_at(16).atoms().len(), 2);
    }

    #[test]
    fn falsifier_detects_common_fixed_direction() {
        // Upper-triangular atoms share the horizontal eigenvector.
        let dist = MapDistribution::new(vec![
            MapAtom::new(MapKind::Moebius(Mat2::new(2.0, 1.0, 0.0, 0.5).unwrap()), 0.5).unwrap(),
            MapAtom::new(MapKind::Moebius(Mat2::new(0.5, -1.0, 0.0, 2.0).unwrap()), 0.5).unwrap(),
        ])
        .unwrap();
        match measures_condition_falsifier(&dist).unwrap() {
            FalsifierVerdict::Fail(FalsifierWitness::CommonFixedPoint(theta)) => {
                assert!(theta.abs() < 1e-9, "expected horizontal direction, got {theta}");
            }
            v => panic!("expected common fixed point, got {v:?}"),
        }
    }

    #[test]
    fn falsifier_passes_rotation_plus_hyperbolic() {
        let dist = MapDistribution::new(vec![
            MapAtom::new(MapKind::Moebius(Mat2::rotation(1.0)), 0.5).unwrap(),
            MapAtom::new(MapKind::Moebius(Mat2::diagonal(2.0).unwrap()), 0.5).unwrap(),
        ])
        .unwrap();
        assert_eq!(
            measures_condition_falsifier(&dist).unwrap(),
            FalsifierVerdict::PassNecessary
        );
    }

    #[test]
    fn falsifier_fails_identity_and_quarter_turn() {
        let id = MapDistribution::new(vec![MapAtom::new(
            MapKind::Moebius(Mat2::identity()),
            1.0,
        )
        .unwrap()])
        .unwrap();
        assert_eq!(
            measures_condition_falsifier(&id).unwrap(),
            FalsifierVerdict::Fail(FalsifierWitness::EveryMeasureInvariant)
        );
        // Quarter-turn rotation swaps the axes pair {0, π/2}: the hyperbolic
        // atom fixes the pair, so the pair obstruction is real.
        let dist = MapDistribution::new(vec![
            MapAtom::new(MapKind::Moebius(Mat2::rotation(PI / 2.0)), 0.5).unwrap(),
            MapAtom::new(MapKind::Moebius(Mat2::diagonal(2.0).unwrap()), 0.5).unwrap(),
        ])
        .unwrap();
        assert!(matches!(
            measures_condition_falsifier(&dist).unwrap(),
            FalsifierVerdict::Fail(FalsifierWitness::InvariantPair { .. })
        ));
    }

    #[test]
    fn permutation_inverse_roundtrips() {
        let p = MapKind::Permutation(vec![2, 0, 1]);
        let inv = p.inverse().unwrap();
        for x in 0..3 {
            let y = apply_map_kind(&p, x as f64);
            assert_eq!(apply_map_kind(&inv, y), x as f64);
        }
    }

    #[test]
    fn rotation_wraps_in_turns() {
        let r = MapKind::Rotation { alpha: 0.75 };
        let x = apply_map_kind(&r, 0.5 * PI); // u = 0.5 -> u = 0.25
        assert!((x - 0.25 * PI).abs() < 1e-12);
        let inv = r.inverse().unwrap();
        assert!((apply_map_kind(&inv, x) - 0.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn atom_json_round_trip_matches_wire_format() {
        let atom = MapAtom::new(MapKind::Affine { a: 0.5, b: 0.25 }, 1.0).unwrap();
        let js = serde_json::to_string(&atom).unwrap();
        assert_eq!(js, r#"{"type":"affine","a":0.5,"b":0.25,"p":1.0}"#);
        let back: MapAtom = serde_json::from_str(&js).unwrap();
        assert_eq!(back, atom);
        let m = MapAtom::new(MapKind::Moebius(Mat2::identity()), 1.0).unwrap();
        let js = serde_json::to_string(&m).unwrap();
        assert_eq!(js, r#"{"type":"moebius","m":[[1.0,0.0],[0.0,1.0]],"p":1.0}"#);
    }
}
