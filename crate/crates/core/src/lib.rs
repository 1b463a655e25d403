//! Exact solution of the central spin model with an arbitrary central spin `s`
//! coupled to a bath of `N` spin-1/2's.
//!
//! * [`sector`]: spectrum from the tridiagonal `(j, m)` blocks.
//! * [`bethe`]: Bethe equations, q-polynomial solver and solution counting.
//! * [`modes`]: frequencies and residues of the symmetric-bath propagator.
//! * [`dynamics`]: evolved coherent states and central-spin observables.
//! * [`oracle`]: dense exact diagonalization used as ground truth.

pub mod bethe;
pub mod dynamics;
pub mod linalg;
pub mod modes;
pub mod oracle;
pub mod quantum;
pub mod sector;

pub use num_complex::Complex64;
pub use quantum::{HalfInt, InhomModelParams, ModelParams, SectorKey};
