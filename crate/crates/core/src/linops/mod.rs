//! Sparse linear algebra kernel: CSR matrices, SPD solves and the action of
//! the matrix exponential.

mod cg;
mod cholesky;
mod expmv;
mod sparse;

pub use cg::pcg;
pub use cholesky::{reverse_cuthill_mckee, SpdSolver};
pub use expmv::{expmv, LinOp, DEGREE_CAP, SUBSTEP_CAP};
pub use sparse::SparseMat;

/// Lumped-mass weighted L2 norm, sqrt(sum m_i x_i^2).
pub fn weighted_norm(mass: &[f64], x: &[f64]) -> f64 {
    mass.iter()
        .zip(x)
        .map(|(m, v)| m * v * v)
        .sum::<f64>()
        .sqrt()
}

pub fn two_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
