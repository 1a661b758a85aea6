//! Numerical analysis of parametric immersions `f: U ⊆ R^m -> R^{m+p}`:
//! evaluation of the DDVV inequality and pointwise Wintgen ideality,
//! Möbius-geometric invariants with structure-equation residual checks,
//! and the cone / cylinder / rotational constructions over super-minimal
//! surfaces.

pub mod constructions;
pub mod ddvv;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod jet;
pub mod moebius;

pub mod config;
pub mod report;

pub use error::{Error, Result};
