//! Krylov-orbit distance experiments for the discrete random Schrödinger
//! operator `H_ω = -Δ + Σ_x ω_x <·, δ_x> δ_x` on `ℤ^d` (`d = 2, 3`).
//!
//! The central quantity is the distance from `δ_(1,1,1)` to
//! `span{H_ω^k δ_0 : k = 0..n}`, computed by a streaming Lanczos
//! recurrence that keeps only three lattice vectors in memory. If that
//! distance stays bounded away from zero as `n -> ∞` with positive
//! probability, the operator has absolutely continuous spectrum. The
//! converse does not hold: a distance tending to zero says nothing about
//! localization.
//!
//! Module map:
//!
//! - [`lattice`]: the truncated cube `{-M..M}^d` and fields on it
//! - [`hamiltonian`]: disorder realizations and the matrix-free operator
//! - [`lanczos`]: the distance series, stored bases and orthogonality loss
//! - [`scaling`]: `n^(-a)` extrapolation and the delocalization criterion
//! - [`bulk`]: taxicab-shell profiles of evolved vectors
//! - [`runner`]: configured sweeps, re-analysis and reports
//! - [`io`], [`plot`]: on-disk formats and SVG charts
//! - [`oracle`], [`free`]: independent reference computations

// `!(x > 0.0)` is how NaN is rejected alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bulk;
pub mod error;
pub mod free;
pub mod hamiltonian;
pub mod io;
pub mod lanczos;
pub mod lattice;
pub mod oracle;
pub mod plot;
pub mod rng;
pub mod runner;
pub mod scaling;

pub use error::{Error, Result};
pub use hamiltonian::{Convention, Potential, TruncationPolicy};
pub use lanczos::{ortho_diagnostic, probe, probe_with_basis, DistanceSeries, KrylovBasis, ProbeOptions};
pub use lattice::{Field, LatticeSpec};
pub use runner::{run_sweep, ExperimentConfig};
pub use scaling::{optimal_a, Mesh, RescaleFit, Thresholds};
