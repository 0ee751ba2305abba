//! Discrete Dirichlet operator: extend surface nodal data into the bulk so
//! that interior stiffness rows vanish, i.e. the P1 harmonic extension.
//! Boundary entries are copied, never solved for, which keeps the trace
//! constraint machine-exact.

use crate::error::{Error, Result};
use crate::fem::FemOperators;
use crate::linops::{SparseMat, SpdSolver};

pub struct DirichletOp {
    interior: Vec<usize>,
    boundary: Vec<usize>,
    /// factorized interior stiffness block A_II; None when there is no interior
    solver: Option<SpdSolver>,
    /// coupling block A_IB
    a_ib: SparseMat,
    n_bulk: usize,
}

pub const DEFAULT_SOLVE_TOL: f64 = 1e-11;

impl DirichletOp {
    pub fn build(fem: &FemOperators) -> Result<Self> {
        Self::build_with_tol(fem, DEFAULT_SOLVE_TOL)
    }

    pub fn build_with_tol(fem: &FemOperators, tol: f64) -> Result<Self> {
        let interior = fem.interior_nodes();
        let boundary = fem.trace_map.clone();
        let a_ii = fem.stiff_bulk.submatrix(&interior, &interior)?;
        let a_ib = fem.stiff_bulk.submatrix(&interior, &boundary)?;
        let solver = if interior.is_empty() {
            None
        } else {
            Some(SpdSolver::new(a_ii, tol).map_err(|e| match e {
                Error::NotSpd(msg) => Error::NotSpd(format!(
                    "interior stiffness block is singular (disconnected mesh?): {msg}"
                )),
                other => other,
            })?)
        };
        Ok(Self {
            interior,
            boundary,
            solver,
            a_ib,
            n_bulk: fem.n_bulk(),
        })
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn n_bulk(&self) -> usize {
        self.n_bulk
    }

    /// Harmonic extension of surface data: boundary entries are copied
    /// bit-exactly, interior entries solve A_II u_I = -A_IB v.
    pub fn extend(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.boundary.len() {
            return Err(Error::DimensionMismatch {
                expected: self.boundary.len(),
                got: v.len(),
            });
        }
        let mut u = vec![0.0; self.n_bulk];
        for (k, &b) in self.boundary.iter().enumerate() {
            u[b] = v[k];
        }
        if let Some(solver) = &self.solver {
            let mut rhs = self.a_ib.mul_vec(v)?;
            for r in &mut rhs {
                *r = -*r;
            }
            let u_i = solver.solve(&rhs)?;
            for (k, &i) in self.interior.iter().enumerate() {
                u[i] = u_i[k];
            }
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::linops::weighted_norm;
    use crate::mesh::{build_disk_mesh, refine_sequence, TriMesh};

    /// Cross mesh: four boundary nodes on the circle, one interior node at the
    /// origin. Small enough to solve by hand.
    fn cross_mesh() -> TriMesh {
        let nodes = vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [0.0, 0.0]];
        let triangles = vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
        let boundary_edges = vec![([0, 1], 0), ([1, 2], 1), ([2, 3], 2), ([3, 0], 3)];
        TriMesh {
            nodes,
            triangles,
            boundary_edges,
            boundary_nodes: vec![0, 1, 2, 3],
            h: 2f64.sqrt(),
        }
    }

    /// Single triangle on the circle: no interior nodes at all.
    fn triangle_mesh() -> TriMesh {
        let t = |k: f64| [k.cos(), k.sin()];
        let nodes = vec![
            t(0.0),
            t(2.0 * std::f64::consts::PI / 3.0),
            t(4.0 * std::f64::consts::PI / 3.0),
        ];
        TriMesh {
            nodes,
            triangles: vec![[0, 1, 2]],
            boundary_edges: vec![([0, 1], 0), ([1, 2], 0), ([2, 0], 0)],
            boundary_nodes: vec![0, 1, 2],
            h: 3f64.sqrt(),
        }
    }

    #[test]
    fn single_interior_node_is_stiffness_weighted_average() {
        let mesh = cross_mesh();
        let fem = assemble(&mesh).unwrap();
        let op = DirichletOp::build(&fem).unwrap();
        // all four triangles are congruent, so the weights are equal
        let u = op.extend(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((u[4] - 2.5).abs() < 1e-12, "center value {}", u[4]);
    }

    #[test]
    fn zero_interior_mesh_extension_is_identity() {
        let mesh = triangle_mesh();
        let fem = assemble(&mesh).unwrap();
        let op = DirichletOp::build(&fem).unwrap();
        let v = vec![0.3, -0.7, 1.9];
        let u = op.extend(&v).unwrap();
        assert_eq!(u, v);
    }

    #[test]
    fn build_is_deterministic() {
        let mesh = build_disk_mesh(0.5).unwrap();
        let fem = assemble(&mesh).unwrap();
        let a = DirichletOp::build(&fem).unwrap();
        let b = DirichletOp::build(&fem).unwrap();
        let v: Vec<f64> = (0..fem.n_surf()).map(|k| (k as f64).sin()).collect();
        assert_eq!(a.extend(&v).unwrap(), b.extend(&v).unwrap());
    }

    #[test]
    fn constants_extend_to_constants() {
        let mesh = build_disk_mesh(0.4).unwrap();
        let fem = assemble(&mesh).unwrap();
        let op = DirichletOp::build(&fem).unwrap();
        let u = op.extend(&vec![2.5; fem.n_surf()]).unwrap();
        for v in u {
            assert!((v - 2.5).abs() < 1e-10);
        }
    }

    #[test]
    fn linear_functions_are_discretely_harmonic() {
        let mesh = build_disk_mesh(0.4).unwrap();
        let fem = assemble(&mesh).unwrap();
        let op = DirichletOp::build(&fem).unwrap();
        let v: Vec<f64> = fem.trace_map.iter().map(|&b| mesh.nodes[b][0]).collect();
        let u = op.extend(&v).unwrap();
        for (i, p) in mesh.nodes.iter().enumerate() {
            assert!((u[i] - p[0]).abs() < 1e-9, "node {i}: {} vs {}", u[i], p[0]);
        }
    }

    #[test]
    fn trace_of_extension_is_bit_exact() {
        let mesh = build_disk_mesh(0.5).unwrap();
        let fem = assemble(&mesh).unwrap();
        let op = DirichletOp::build(&fem).unwrap();
        let v: Vec<f64> = (0..fem.n_surf())
            .map(|k| ((k * 37 + 5) as f64).sin())
            .collect();
        let u = op.extend(&v).unwrap();
        for (k, &b) in fem.trace_map.iter().enumerate() {
            assert_eq!(u[b].to_bits(), v[k].to_bits());
        }
    }

    #[test]
    fn discrete_harmonicity_and_linearity() {
        let mesh = build_disk_mesh(0.35).unwrap();
        let fem = assemble(&mesh).unwrap();
        let op = DirichletOp::build(&fem).unwrap();
        let v: Vec<f64> = (0..fem.n_surf()).map(|k| (3.0 * k as f64).cos()).collect();
        let w: Vec<f64> = (0..fem.n_surf())
            .map(|k| (k as f64 * 0.11).tanh())
            .collect();
        let ev = op.extend(&v).unwrap();

        let residual = fem.stiff_bulk.mul_vec(&ev).unwrap();
        let v_norm = crate::linops::two_norm(&v);
        for &i in op.interior() {
            assert!(
                residual[i].abs() <= 1e-9 * v_norm.max(1.0),
                "row {i}: {}",
                residual[i]
            );
        }

        let combo: Vec<f64> = v.iter().zip(&w).map(|(a, b)| 1.5 * a - 0.4 * b).collect();
        let e_combo = op.extend(&combo).unwrap();
        let ew = op.extend(&w).unwrap();
        for i in 0..fem.n_bulk() {
            let expect = 1.5 * ev[i] - 0.4 * ew[i];
            assert!((e_combo[i] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn extension_norm_is_stable_under_refinement() {
        let meshes = refine_sequence(0.5, 4).unwrap();
        let mut prev: Option<f64> = None;
        for mesh in &meshes {
            let fem = assemble(&mesh).unwrap();
            let op = DirichletOp::build(&fem).unwrap();
            // smooth boundary data dominates the norm ratio
            let mut worst = 0.0_f64;
            for data in [
                fem.trace_map.iter().map(|_| 1.0).collect::<Vec<f64>>(),
                fem.trace_map
                    .iter()
                    .map(|&b| mesh.node_angle(b).cos())
                    .collect(),
                fem.trace_map
                    .iter()
                    .map(|&b| (2.0 * mesh.node_angle(b)).sin())
                    .collect(),
            ] {
                let u = op.extend(&data).unwrap();
                let ratio =
                    weighted_norm(&fem.mass_bulk, &u) / weighted_norm(&fem.mass_surf, &data);
                worst = worst.max(ratio);
            }
            if let Some(p) = prev {
                assert!(worst <= 1.10 * p, "extension norm grew from {p} to {worst}");
            }
            prev = Some(worst);
        }
    }
}
