//! Nonlocal conservation laws on periodic grids: pair-interaction flux
//! operators, contraction resolvents, implicit-Euler semigroup evolution,
//! and an entropy auditor with closed-form reference solutions.
//!
//! The crate is organized bottom-up:
//! - [`grid`]: periodic lattices, fields, lattice shifts, norms.
//! - [`kernel`]: interaction kernels and their quadrature stencils.
//! - [`flux`]: monotone two-point fluxes and Kruzkov entropy fluxes.
//! - [`operator`]: the assembled nonlocal operator, explicit stepping.
//! - [`resolvent`]: implicit solves, viscous regularization, properties.
//! - [`semigroup`]: implicit/explicit/forced evolution, limit studies.
//! - [`oracle`]: exact Riemann and transport references.
//! - [`verify`]: entropy audit and the theorem property suite.

// `!(x > 0.0)` is used throughout to reject NaN along with the sign.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flux;
pub mod grid;
pub mod kernel;
pub mod operator;
pub mod oracle;
pub mod resolvent;
pub mod semigroup;
pub mod verify;

pub use error::{Error, Result};
pub use flux::{FluxKind, FluxPair};
pub use grid::{Grid, GridField, ShiftVector};
pub use kernel::{KernelSpec, Profile, Stencil, Symmetry};
pub use operator::OperatorAssembly;
pub use resolvent::{assemble, solve_resolvent, Method, ResolventOptions, SolveReport};
pub use semigroup::{evolve_explicit, evolve_implicit, Scheme, Trajectory};
