//! First eigenpair of the coupled (p,q)-Laplacian Dirichlet system
//!
//! ```text
//! -div(|grad u|^(p-2) grad u) = lambda |u|^(alpha-1) |v|^(beta-1) v
//! -div(|grad v|^(q-2) grad v) = lambda |u|^(alpha-1) |v|^(beta-1) u
//! u = v = 0 on the boundary,      alpha/p + beta/q = 1,
//! ```
//!
//! computed by minimizing the energy
//! `I(u,v) = (alpha/p) int |grad u|^p + (beta/q) int |grad v|^q`
//! over the manifold `int |u|^(alpha-1) |v|^(beta-1) u v = 1` with projected
//! gradient descent, on uniform finite-difference grids in 1D and 2D.
//!
//! Besides the solver the crate ships verification machinery: a linear and a
//! scalar p-Laplacian oracle, a multi-start protocol that checks the first
//! eigenvalue is simple (eigenfunctions unique up to scaling) and the
//! eigenfunctions single-signed, and numerical checks of every inequality
//! used in the simplicity proof (Jensen's inequality on gradient convex
//! combinations, pointwise power-mean concavity, midpoint-path energies,
//! four-way cross-normalization).

pub mod cli;
pub mod error;
pub mod functional;
pub mod mesh;
pub mod oracle;
pub mod proofcheck;
pub mod solver;

pub use error::{Error, Result};
pub use functional::Exponents;
pub use mesh::{Grid, ScalarField};
pub use solver::{EigenPair, SimplicityVerdict, SolverConfig, SolverReport};
