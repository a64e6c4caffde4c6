//! Numerical laboratory for d-coupled cubic–quintic Schrödinger systems with
//! critical exponent on balls in ℝ³:
//!
//! −Δu_i + λ_i u_i = Σ_j β_ij |u_j|³ |u_i| u_i  on B_R,  u_i ∈ H¹₀(B_R).
//!
//! The crate computes least-energy positive solutions constrained to Nehari
//! manifolds, the associated ground-state levels, and the derived constants
//! (Sobolev quotients, coupling thresholds, energy gaps) that control
//! existence, and it verifies the energy inequalities separating the
//! synchronized, segregated, and semitrivial regimes.
//!
//! All numerics are generic over the scalar type via [`scalar::Scalar`];
//! the aliases at the crate root pin the standard f64 instantiation.

pub mod bubbles;
pub mod constants;
mod dense;
pub mod error;
pub mod estimates;
pub mod nehari;
pub mod radial;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::{lit, Scalar};

/// The scalar type of the standard instantiation.
pub type Real = f64;
/// Radial grid at the standard precision.
pub type Grid = radial::RadialGrid<Real>;
/// One component profile at the standard precision.
pub type Field = radial::ComponentField<Real>;
/// System state (all d components) at the standard precision.
pub type Fields = radial::FieldVector<Real>;
/// Problem data (d, radius, λ, β) at the standard precision.
pub type Params = constants::ProblemParams<Real>;
