//! # nonstat-core
//!
//! Numerical machinery for *non-stationary* random dynamical systems: iterated
//! compositions `f_n ∘ … ∘ f_1` where each map `f_n` is drawn independently from
//! a step-dependent distribution `μ_n` on a compact phase space.
//!
//! In the stationary case (all `μ_n` equal) the random Birkhoff theorem compares
//! time averages of an observable against its integral under a stationary
//! measure. Without stationarity there is no stationary measure; the natural
//! replacement is the deterministic recursion
//!
//! ```text
//! ν_n := μ_n ∗ ν_{n−1},      μ ∗ ν = law of f(x), f ~ μ, x ~ ν,
//! ```
//!
//! and the quantity whose decay this crate measures is the ergodic deviation
//!
//! ```text
//! D_n = (1/n) | Σ_{k=1..n} φ(x_k)  −  Σ_{k=1..n} ∫ φ dν_k |.
//! ```
//!
//! `D_n → 0` holds under a *uniform contraction condition* on the distribution
//! sequence: for every δ > 0 there is an `m` such that averaging over any `m`
//! consecutive steps brings any two initial measures within Wasserstein
//! distance δ. The crate provides:
//!
//! - [`measures`] — discrete measures on one-dimensional phase spaces with
//!   exact Wasserstein-1 solvers, an LP transport oracle, and the monotone
//!   quantile coupling,
//! - [`models`] — concrete map families (contracting affine IFS, `SL(2,ℝ)`
//!   projective actions, finite-state permutations, circle rotations) and
//!   step-distribution sequences,
//! - [`propagation`] — forward propagation of `ν_n`, backward propagation of
//!   inverse measures, and the contraction-gap checker,
//! - [`simulate`] — random orbits, deviation series, large-deviations rate
//!   fits, and two-point contraction statistics,
//! - [`experiments`] — canned experiments (slow-diffusion and rotation
//!   counterexamples) behind a name registry, plus the contraction profiler,
//! - [`scenario`] — versioned JSON scenario/measure file formats.
//!
//! All randomness flows through counter-based seeded streams ([`rng`]), so
//! every result is bit-reproducible across runs, platforms, and thread counts.

pub mod error;
pub mod experiments;
pub mod measures;
pub mod models;
pub mod propagation;
pub mod rng;
pub mod scenario;
pub mod simulate;

pub use error::{Error, Result};

/// File-format / tool version tag embedded in every artifact.
pub const VERSION: &str = "nonstat-rds/1";
