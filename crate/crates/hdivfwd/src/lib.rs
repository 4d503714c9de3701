//! Mixed RT0/P0 finite element solver for the EEG forward problem on
//! regular hexahedral meshes, with a conforming trilinear FEM baseline,
//! a multilayer-sphere analytic reference, and an evaluation harness.
//!
//! The main pipeline is:
//!
//! 1. build a labeled hexahedral mesh ([`hexmesh`]),
//! 2. assemble the saddle-point blocks A and B ([`assembly`]),
//! 3. build a dipole right-hand side ([`sources`]),
//! 4. solve the Schur-complement system ([`solver`]),
//! 5. compare against the analytic sphere reference ([`analytic`], [`evaluation`]).
//!
//! See the crate examples for runnable end-to-end demonstrations of each
//! capability, and the `hdivfwd` binary for the command-line front end.

pub mod analytic;
pub mod assembly;
pub mod cg_baseline;
pub mod cli;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod export;
pub mod hexmesh;
pub mod solver;
pub mod sources;
pub mod sparse;
pub mod vecops;

pub use error::{Error, Result};
