//! Virtual-queue proximal method for convex programs with Lipschitz
//! inequality constraints, with an `O(1/t)` error rate for the running
//! average of its iterates.
//!
//! * [`program`]: problem representation, evaluation and Lipschitz estimates
//! * [`oracles`]: solvers for the penalized primal subproblem
//! * [`solver`]: the iteration itself, invariant checks and bound verification
//! * [`baseline`]: dual subgradient with primal averaging, for comparison
//! * [`netflow`]: multipath network utility maximization and its
//!   decentralized per-link / per-source simulation
//! * [`problems`]: the bundled experiment instances

pub mod baseline;
pub mod error;
pub mod linalg;
pub mod netflow;
pub mod oracles;
pub mod problems;
pub mod program;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
pub use program::{BoxSet, ConvexProgram};
pub use report::{Algorithm, ConstraintMode, RunReport};
