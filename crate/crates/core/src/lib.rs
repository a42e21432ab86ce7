//! Verification laboratory for Neumann-type maximum principles on closed
//! manifolds.
//!
//! Closed manifolds are replaced by exact finite spectral models: a set of
//! quadrature nodes with positive weights, a weighted-orthonormal eigenbasis
//! and the matching eigenvalues of the (negative) Laplacian `Δ = div ∇`.
//! On these models every explicit construction is evaluated exactly:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`model`] | flat torus, zonal 3-sphere and weighted graph models; gradient, weak divergence, Laplacian |
//! | [`norms`] | volume-normalized `L^p` norms, averages, positive/negative parts |
//! | [`kernels`] | heat kernel, centered kernel, Green function and their identities |
//! | [`constants`] | Moser-iteration constants, the product `A`, `C₂`, `C₀(n)` |
//! | [`isoperimetric`] | lower-bound estimators of the normalized isoperimetric constant |
//! | [`solver`] | Poisson solves, subsolution generation and the three maximum-principle checks |
//! | [`harness`] | randomized suites, JSON-lines persistence and reports |
//!
//! Sign convention: eigenvalues are stored as `λ_k ≥ 0` with `Δφ_k = −λ_k φ_k`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod error;
pub mod harness;
pub mod isoperimetric;
pub mod kernels;
pub mod model;
pub mod norms;
pub mod record;
pub mod solver;

pub use error::{Error, Result};
pub use model::{ModelKind, ModelSpec, ScalarField, SpectralModel, VectorField};
pub use record::{CheckStatus, VerificationRecord};
