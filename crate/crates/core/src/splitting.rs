//! The splitting time stepper on the mass-transformed semi-discrete system.
//!
//! One step: explicit nonlinearity/forcing update of both components, surface
//! flow, then the bulk flow of the homogeneous Dirichlet problem with the
//! boundary values re-imposed through the harmonic extension. The boundary
//! entries of the new bulk vector are copied from the new surface vector, so
//! the coupling constraint holds bit-exactly along the trajectory.

use crate::dirichlet::DirichletOp;
use crate::error::{Error, Result};
use crate::fem::FemOperators;
use crate::linops::{expmv, SparseMat};
use crate::mesh::TriMesh;
use crate::problems::ProblemSpec;

/// Trajectory point: time, bulk nodal vector, surface nodal vector.
#[derive(Debug, Clone)]
pub struct SplitState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct StepperConfig {
    pub tau: f64,
    pub t_max: f64,
    pub expmv_tol: f64,
}

pub const DEFAULT_EXPMV_TOL: f64 = 1e-10;

impl StepperConfig {
    pub fn new(tau: f64, t_max: f64) -> Self {
        Self {
            tau,
            t_max,
            expmv_tol: DEFAULT_EXPMV_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.t_max < 0.0 {
            return Err(Error::Config("t_max must be nonnegative".into()));
        }
        let steps = self.t_max / self.tau;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Config(format!(
                "t_max {} is not an integer multiple of tau {}",
                self.t_max, self.tau
            )));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.tau).round() as usize
    }
}

/// Mass-transformed operators driving the stepper.
pub struct TransformedOps {
    /// negated transformed interior bulk stiffness, generator of the bulk flow
    pub gen_bulk_interior: SparseMat,
    /// negated transformed surface stiffness, generator of the surface flow
    pub gen_surf: SparseMat,
    pub dirichlet: DirichletOp,
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    pub node_xy: Vec<[f64; 2]>,
    pub surf_theta: Vec<f64>,
    pub mass_bulk: Vec<f64>,
    pub mass_surf: Vec<f64>,
    flux_variational: SparseMat,
}

impl TransformedOps {
    pub fn build(mesh: &TriMesh, fem: &FemOperators) -> Result<Self> {
        let interior = fem.interior_nodes();
        let boundary = fem.trace_map.clone();
        let a_ii = fem.stiff_bulk.submatrix(&interior, &interior)?;
        let bulk_factors: Vec<f64> = interior.iter().map(|&i| -1.0 / fem.mass_bulk[i]).collect();
        let gen_bulk_interior = a_ii.scale_rows(&bulk_factors)?;
        let surf_factors: Vec<f64> = fem.mass_surf.iter().map(|m| -1.0 / m).collect();
        let gen_surf = fem.stiff_surf.scale_rows(&surf_factors)?;

        // constants must stay in the kernel of the transformed surface operator
        let kernel_defect = gen_surf
            .mul_vec(&vec![1.0; fem.n_surf()])?
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        if kernel_defect > 1e-10 * gen_surf.one_norm() {
            return Err(Error::Assembly(format!(
                "transformed surface operator does not annihilate constants: {kernel_defect:.3e}"
            )));
        }

        // variational flux: boundary rows of the bulk stiffness against the
        // lumped surface mass
        let all: Vec<usize> = (0..fem.n_bulk()).collect();
        let flux_rows = fem.stiff_bulk.submatrix(&boundary, &all)?;
        let inv_surf: Vec<f64> = fem.mass_surf.iter().map(|m| 1.0 / m).collect();
        let flux_variational = flux_rows.scale_rows(&inv_surf)?;

        let surf_theta = boundary.iter().map(|&b| mesh.node_angle(b)).collect();
        Ok(Self {
            gen_bulk_interior,
            gen_surf,
            dirichlet: DirichletOp::build(fem)?,
            interior,
            boundary,
            node_xy: mesh.nodes.clone(),
            surf_theta,
            mass_bulk: fem.mass_bulk.clone(),
            mass_surf: fem.mass_surf.clone(),
            flux_variational,
        })
    }

    pub fn n_bulk(&self) -> usize {
        self.node_xy.len()
    }

    pub fn n_surf(&self) -> usize {
        self.boundary.len()
    }

    /// Homogeneous Dirichlet bulk flow: boundary entries of the input are
    /// discarded, the interior block is exponentiated, the result has an
    /// exactly zero trace.
    pub fn semigroup_t0(&self, tau: f64, w: &[f64], tol: f64) -> Result<Vec<f64>> {
        if w.len() != self.n_bulk() {
            return Err(Error::DimensionMismatch {
                expected: self.n_bulk(),
                got: w.len(),
            });
        }
        let w_int: Vec<f64> = self.interior.iter().map(|&i| w[i]).collect();
        let evolved = expmv(tau, &self.gen_bulk_interior, &w_int, tol)?;
        let mut out = vec![0.0; self.n_bulk()];
        for (li, &gi) in self.interior.iter().enumerate() {
            out[gi] = evolved[li];
        }
        Ok(out)
    }

    /// Surface flow S(tau).
    pub fn semigroup_s(&self, tau: f64, y: &[f64], tol: f64) -> Result<Vec<f64>> {
        expmv(tau, &self.gen_surf, y, tol)
    }

    /// Action of the surface generator (the operator B of the surface
    /// equation): v -> -M_G^{-1} A_G v.
    pub fn b_action(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.gen_surf.mul_vec(v)
    }

    /// Nodal Neumann trace of a bulk vector: variational flux recovery
    /// M_G^{-1} (A_Omega u)|_Gamma, the weak normal derivative tested against
    /// the boundary hat functions.
    ///
    /// The stepper uses this rather than an elementwise edge flux because it
    /// inherits the discrete conservation structure (summed against the
    /// surface mass it equals the interior stiffness residual), so coupling
    /// errors cannot bias the surface mean; a local flux estimate drifts the
    /// mean of the dynamic-boundary solution at every step.
    pub fn neumann_trace(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.flux_variational.mul_vec(u)
    }

    /// Neumann trace consistent with the coupled lumped discretization: the
    /// boundary rows of the bulk equation define M_G w = (M_O u_t)_G +
    /// (A_O u)_G - (M_O f_1)_G, the constraint identifies u_t with v_t on the
    /// boundary, and substituting the surface equation for v_t leaves a
    /// diagonal system for w.
    pub fn coupled_neumann_trace(
        &self,
        problem: &ProblemSpec,
        t: f64,
        u: &[f64],
        v: &[f64],
    ) -> Result<Vec<f64>> {
        let base = self.flux_variational.mul_vec(u)?; // M_G^{-1} (A_O u)_G
        let bv = self.gen_surf.mul_vec(v)?;
        let mut w = Vec::with_capacity(v.len());
        for (k, &b) in self.boundary.iter().enumerate() {
            let m_o = self.mass_bulk[b];
            let m_g = self.mass_surf[k];
            // f_Gamma alone: evaluate f2 with a zero Neumann value
            let f_gamma = problem.f2(u[b], v[k], Some(0.0))?;
            let surface_rhs = bv[k] + f_gamma + problem.rho2(self.surf_theta[k], t);
            let bulk_rhs = problem.f1(u[b]) + problem.rho1(self.node_xy[b], t);
            w.push((m_o * (surface_rhs - bulk_rhs) + m_g * base[k]) / (m_g + m_o));
        }
        Ok(w)
    }
}

/// One step of the splitting scheme.
pub fn lie_step(
    state: &SplitState,
    problem: &ProblemSpec,
    cfg: &StepperConfig,
    ops: &TransformedOps,
) -> Result<SplitState> {
    let tau = cfg.tau;
    let t = state.t;
    let (u, v) = (&state.u, &state.v);

    // explicit update with nonlinearity and inhomogeneity at the left endpoint
    let mut u_tilde = Vec::with_capacity(u.len());
    for (i, &ui) in u.iter().enumerate() {
        u_tilde.push(ui + tau * (problem.f1(ui) + problem.rho1(ops.node_xy[i], t)));
    }
    let neumann = if problem.kind.needs_neumann_trace() {
        Some(ops.coupled_neumann_trace(problem, t, u, v)?)
    } else {
        None
    };
    let mut v_tilde = Vec::with_capacity(v.len());
    for (k, &vk) in v.iter().enumerate() {
        let trace_u = u[ops.boundary[k]];
        let f2 = problem.f2(trace_u, vk, neumann.as_ref().map(|n| n[k]))?;
        v_tilde.push(vk + tau * (f2 + problem.rho2(ops.surf_theta[k], t)));
    }

    // surface flow first; its output feeds the boundary correction
    let v_next = ops.semigroup_s(tau, &v_tilde, cfg.expmv_tol)?;

    // b = v_tilde + tau * B v_next
    let bv = ops.b_action(&v_next)?;
    let b: Vec<f64> = v_tilde
        .iter()
        .zip(&bv)
        .map(|(vt, bvk)| vt + tau * bvk)
        .collect();

    // u_next = T0(tau)(u_tilde - D0 b) + D0 v_next, trace copied bit-exactly
    let ext_b = ops.dirichlet.extend(&b)?;
    let w: Vec<f64> = u_tilde.iter().zip(&ext_b).map(|(a, c)| a - c).collect();
    let evolved = ops.semigroup_t0(tau, &w, cfg.expmv_tol)?;
    let ext_v = ops.dirichlet.extend(&v_next)?;
    let mut u_next = vec![0.0; u.len()];
    for &i in &ops.interior {
        u_next[i] = evolved[i] + ext_v[i];
    }
    for (k, &bidx) in ops.boundary.iter().enumerate() {
        u_next[bidx] = v_next[k];
    }

    Ok(SplitState {
        t: t + tau,
        u: u_next,
        v: v_next,
    })
}

/// Run the stepper to t_max, returning all states including the initial one.
pub fn integrate(
    u0: Vec<f64>,
    v0: Vec<f64>,
    problem: &ProblemSpec,
    cfg: &StepperConfig,
    ops: &TransformedOps,
) -> Result<Vec<SplitState>> {
    cfg.validate()?;
    if u0.len() != ops.n_bulk() || v0.len() != ops.n_surf() {
        return Err(Error::DimensionMismatch {
            expected: ops.n_bulk(),
            got: u0.len(),
        });
    }
    for (k, &b) in ops.boundary.iter().enumerate() {
        if u0[b] != v0[k] {
            return Err(Error::Config(format!(
                "initial data violates the trace constraint at surface node {k}"
            )));
        }
    }
    let mut trajectory = Vec::with_capacity(cfg.n_steps() + 1);
    trajectory.push(SplitState {
        t: 0.0,
        u: u0,
        v: v0,
    });
    for _ in 0..cfg.n_steps() {
        let next = lie_step(trajectory.last().unwrap(), problem, cfg, ops)?;
        trajectory.push(next);
    }
    Ok(trajectory)
}
