use thiserror::Error;

/// Errors produced by the mesh, assembly, linear algebra and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh generation failed: {0}")]
    MeshGeneration(String),

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("linear solve did not converge: residual {residual:.3e} > tol {tol:.3e}")]
    SolveDidNotConverge { residual: f64, tol: f64 },

    #[error("matrix exponential action did not reach tolerance: estimate {estimate:.3e} > tol {tol:.3e}")]
    ExpmvDidNotConverge { estimate: f64, tol: f64 },

    #[error("adaptive quadrature did not converge: estimate {estimate:.3e} > tol {tol:.3e}")]
    QuadratureDidNotConverge { estimate: f64, tol: f64 },

    #[error("problem size {n} exceeds dense-framework cap {cap}")]
    SizeCapExceeded { n: usize, cap: usize },

    #[error("dynamic-boundary problem requires a Neumann trace value")]
    MissingNeumannTrace,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
