//! Trust-region optimisation whose box-constrained quadratic subproblems are
//! solved by a simulated economical coherent Ising machine (ECIM).
//!
//! The crate is organised around the pieces of the method:
//!
//! * [`model`]: quadratic Ising energies and the objectives they approximate;
//! * [`ecim`]: the projected, optionally noisy, gradient dynamics of the machine;
//! * [`trust_region`]: the outer iTrust loop;
//! * [`oracles`]: brute-force and exact reference solvers;
//! * [`objectives`]: the test problem suite and constant estimators;
//! * [`verify`]: convergence-bound campaigns and rate fits;
//! * [`cli`]: the experiment runner behind the `itrust` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ecim;
pub mod error;
pub mod linalg;
pub mod model;
pub mod objectives;
pub mod oracles;
pub mod trust_region;
pub mod verify;

pub use ecim::{minimize, run_ecim, EcimConfig, EcimSummary, EcimTrace, Schedule};
pub use error::{Error, Result};
pub use model::{build_subproblem, Objective, QuadraticModel};
pub use oracles::{exact_ball_minimize, grid_minimize_box, OracleSolution};
pub use trust_region::{itrust, SubproblemSolver, TrustRegionConfig, TrustRegionTrace};
