//! Relative-velocity D2Q9 lattice Boltzmann schemes: moment bases,
//! equilibria, shifted-moment collisions, a periodic solver, von Neumann
//! stability analysis and the experiment drivers built on them.

// `!(x <= y)` is used on purpose so that NaN falls on the failing side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision;
pub mod eigen;
pub mod equilibrium;
pub mod error;
pub mod experiment;
pub mod lattice;
pub mod moments;
pub mod sim;
pub mod stability;

pub use collision::{Collider, RelaxationVector, ShiftSolver, UtildePolicy};
pub use equilibrium::{EquilibriumKind, LatticeConstants};
pub use error::{Error, Result};
pub use lattice::{Grid, Mat9, Vec2, Vec9, VelocitySet};
pub use moments::{Family, MomentBasis};
pub use sim::{FieldState, RunOutcome, SchemeConfig, Simulation};
pub use stability::{KScan, ShiftPolicy, StabilityProblem};
