//! Concrete problem instances: exact solution, manufactured inhomogeneities
//! and the nonlinearity pairs, including the dynamic-boundary-condition
//! variants where the surface nonlinearity consumes the Neumann trace.
//!
//! The shared exact solution is u(x, t) = exp(-t) x1^2 x2^2 with surface
//! component v = u restricted to the unit circle. Inhomogeneities are chosen
//! so the pair solves the coupled system identically.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    AllenCahn,
    Mixing,
    DynbcAllenCahn,
    DynbcMixing,
    /// F = 0, rho = 0; linear homogeneous system used by the oracle tests
    Zero,
}

impl ProblemKind {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "allen-cahn" => Ok(Self::AllenCahn),
            "mixing" => Ok(Self::Mixing),
            "dynbc-allen-cahn" => Ok(Self::DynbcAllenCahn),
            "dynbc-mixing" => Ok(Self::DynbcMixing),
            other => Err(Error::Config(format!(
                "unknown problem '{other}' (expected allen-cahn, mixing, dynbc-allen-cahn or dynbc-mixing)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::AllenCahn => "allen-cahn",
            Self::Mixing => "mixing",
            Self::DynbcAllenCahn => "dynbc-allen-cahn",
            Self::DynbcMixing => "dynbc-mixing",
            Self::Zero => "zero",
        }
    }

    pub fn needs_neumann_trace(self) -> bool {
        matches!(self, Self::DynbcAllenCahn | Self::DynbcMixing)
    }
}

// closed forms of the exact solution and its derivatives

fn exact_bulk(x: [f64; 2], t: f64) -> f64 {
    (-t).exp() * x[0] * x[0] * x[1] * x[1]
}

fn exact_bulk_dt(x: [f64; 2], t: f64) -> f64 {
    -exact_bulk(x, t)
}

fn exact_bulk_laplacian(x: [f64; 2], t: f64) -> f64 {
    2.0 * (-t).exp() * (x[0] * x[0] + x[1] * x[1])
}

fn circle_point(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

fn exact_surface(theta: f64, t: f64) -> f64 {
    exact_bulk(circle_point(theta), t)
}

fn exact_surface_dt(theta: f64, t: f64) -> f64 {
    -exact_surface(theta, t)
}

/// Laplace-Beltrami on the unit circle is the second angular derivative.
fn exact_surface_laplacian(theta: f64, t: f64) -> f64 {
    2.0 * (-t).exp() * (4.0 * theta).cos()
}

/// grad u . x on the unit circle.
fn exact_normal_derivative(theta: f64, t: f64) -> f64 {
    4.0 * exact_surface(theta, t)
}

#[derive(Debug, Clone, Copy)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub t_max: f64,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind) -> Self {
        Self { kind, t_max: 1.0 }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(Self::new(ProblemKind::from_name(name)?))
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn exact_u(&self, x: [f64; 2], t: f64) -> f64 {
        match self.kind {
            ProblemKind::Zero => 0.0,
            _ => exact_bulk(x, t),
        }
    }

    pub fn exact_v(&self, theta: f64, t: f64) -> f64 {
        match self.kind {
            ProblemKind::Zero => 0.0,
            _ => exact_surface(theta, t),
        }
    }

    /// Surface solution evaluated through the node coordinates of a boundary
    /// point. For points on the unit circle this agrees with [`Self::exact_v`]
    /// and keeps nodal interpolants of both components bitwise consistent.
    pub fn exact_v_at(&self, xy: [f64; 2], t: f64) -> f64 {
        self.exact_u(xy, t)
    }

    /// Bulk nonlinearity, evaluated nodally.
    pub fn f1(&self, u: f64) -> f64 {
        match self.kind {
            ProblemKind::AllenCahn | ProblemKind::DynbcAllenCahn | ProblemKind::Zero => 0.0,
            ProblemKind::Mixing | ProblemKind::DynbcMixing => u * u,
        }
    }

    /// Surface nonlinearity; `trace_u` is the bulk value at the node,
    /// `neumann` the discrete Neumann trace (required for dynbc variants).
    pub fn f2(&self, trace_u: f64, v: f64, neumann: Option<f64>) -> Result<f64> {
        let coupling = if self.kind.needs_neumann_trace() {
            match neumann {
                Some(dn) => -dn,
                None => return Err(Error::MissingNeumannTrace),
            }
        } else {
            0.0
        };
        Ok(match self.kind {
            ProblemKind::Zero => 0.0,
            ProblemKind::AllenCahn | ProblemKind::DynbcAllenCahn => coupling - v * v * v + v,
            ProblemKind::Mixing | ProblemKind::DynbcMixing => coupling + v * trace_u,
        })
    }

    /// Both nonlinearity components at one node.
    pub fn nonlinearity(&self, u: f64, v: f64, neumann: Option<f64>) -> Result<(f64, f64)> {
        Ok((self.f1(u), self.f2(u, v, neumann)?))
    }

    /// Bulk inhomogeneity: dt u - lap u - F1(u) along the exact solution.
    pub fn rho1(&self, x: [f64; 2], t: f64) -> f64 {
        match self.kind {
            ProblemKind::Zero => 0.0,
            _ => {
                let u = exact_bulk(x, t);
                exact_bulk_dt(x, t) - exact_bulk_laplacian(x, t) - self.f1(u)
            }
        }
    }

    /// Surface inhomogeneity: dt v - lap_G v - F2 along the exact solution,
    /// where the dynbc variants include the exact normal derivative.
    pub fn rho2(&self, theta: f64, t: f64) -> f64 {
        match self.kind {
            ProblemKind::Zero => 0.0,
            _ => {
                let v = exact_surface(theta, t);
                let neumann = if self.kind.needs_neumann_trace() {
                    Some(exact_normal_derivative(theta, t))
                } else {
                    None
                };
                // trace of the exact bulk solution equals v on the circle
                let f2 = self.f2(v, v, neumann).expect("neumann provided");
                exact_surface_dt(theta, t) - exact_surface_laplacian(theta, t) - f2
            }
        }
    }
}
