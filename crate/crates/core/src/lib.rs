//! Lie splitting time integrator for boundary coupled parabolic systems,
//! realized as a bulk-surface P1 finite element solver on the unit disk.
//!
//! The crate has three layers:
//! - discretization: [`mesh`], [`fem`], [`dirichlet`], [`linops`];
//! - time stepping: [`splitting`] with the problem definitions in [`problems`];
//! - verification: a dense [`oracle`] for the operator identities and the
//!   convergence [`harness`] driving the experiments.

pub mod dirichlet;
pub mod error;
pub mod fem;
pub mod fitting;
pub mod harness;
pub mod linops;
pub mod mesh;
pub mod oracle;
pub mod problems;
pub mod splitting;

pub use error::{Error, Result};
