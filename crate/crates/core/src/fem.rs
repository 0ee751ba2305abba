//! P1 bulk and surface finite element assembly on a disk triangulation.
//!
//! Bulk: standard linear triangles with row-sum mass lumping. Surface: linear
//! elements on the closed polygonal boundary curve. Loads use a degree-4
//! triangle rule and 3-point Gauss per boundary edge so quadrature error is
//! negligible against the discretization error.

use crate::error::{Error, Result};
use crate::linops::SparseMat;
use crate::mesh::{signed_area, TriMesh};

/// Degree-4 rule on the reference triangle: (l1, l2, weight), weights sum to 1
/// and scale with the physical area.
const TRI_QUAD_D4: [(f64, f64, f64); 6] = [
    (0.108103018168070, 0.445948490915965, 0.223381589678011),
    (0.445948490915965, 0.108103018168070, 0.223381589678011),
    (0.445948490915965, 0.445948490915965, 0.223381589678011),
    (0.816847572980459, 0.091576213509771, 0.109951743655322),
    (0.091576213509771, 0.816847572980459, 0.109951743655322),
    (0.091576213509771, 0.091576213509771, 0.109951743655322),
];

/// 3-point Gauss on [-1, 1].
const GAUSS3: [(f64, f64); 3] = [
    (-0.7745966692414834, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.7745966692414834, 5.0 / 9.0),
];

/// Assembled operators of the semi-discrete bulk-surface system.
#[derive(Debug, Clone, PartialEq)]
pub struct FemOperators {
    /// lumped bulk mass (diagonal), length N_bulk
    pub mass_bulk: Vec<f64>,
    /// bulk stiffness, N_bulk x N_bulk
    pub stiff_bulk: SparseMat,
    /// lumped surface mass (diagonal), length N_surf
    pub mass_surf: Vec<f64>,
    /// surface stiffness on the boundary polygon, N_surf x N_surf
    pub stiff_surf: SparseMat,
    /// surface DOF k -> bulk node index
    pub trace_map: Vec<usize>,
    /// edge-flux matrix, N_surf x N_bulk
    pub neumann_mat: SparseMat,
}

impl FemOperators {
    pub fn n_bulk(&self) -> usize {
        self.mass_bulk.len()
    }

    pub fn n_surf(&self) -> usize {
        self.mass_surf.len()
    }

    /// Bulk indices not on the boundary, ascending.
    pub fn interior_nodes(&self) -> Vec<usize> {
        let mut on_boundary = vec![false; self.n_bulk()];
        for &b in &self.trace_map {
            on_boundary[b] = true;
        }
        (0..self.n_bulk()).filter(|&i| !on_boundary[i]).collect()
    }

    /// Restrict a bulk vector to the surface DOFs.
    pub fn trace(&self, u: &[f64]) -> Vec<f64> {
        self.trace_map.iter().map(|&b| u[b]).collect()
    }

    /// Nodal Neumann trace M_G^{-1} (N u).
    pub fn neumann_trace(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut flux = self.neumann_mat.mul_vec(u)?;
        for (f, m) in flux.iter_mut().zip(&self.mass_surf) {
            *f /= m;
        }
        Ok(flux)
    }
}

/// Gradients of the three barycentric basis functions and the triangle area.
fn p1_gradients(p: [[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let area = signed_area(p[0], p[1], p[2]);
    let mut grads = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        grads[i][0] = (p[j][1] - p[k][1]) / (2.0 * area);
        grads[i][1] = (p[k][0] - p[j][0]) / (2.0 * area);
    }
    (area, grads)
}

/// Element stiffness matrix of a P1 triangle.
pub fn element_stiffness(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let (area, g) = p1_gradients(p);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    k
}

fn surf_index_map(mesh: &TriMesh) -> Vec<Option<usize>> {
    let mut map = vec![None; mesh.n_nodes()];
    for (k, &b) in mesh.boundary_nodes.iter().enumerate() {
        map[b] = Some(k);
    }
    map
}

pub fn assemble(mesh: &TriMesh) -> Result<FemOperators> {
    let n = mesh.n_nodes();
    let mut mass_bulk = vec![0.0; n];
    let mut stiff_trip = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.triangle_nodes(t);
        let area = signed_area(p[0], p[1], p[2]);
        if area <= 0.0 {
            return Err(Error::Assembly(format!(
                "triangle {t} with nodes {tri:?} has nonpositive area"
            )));
        }
        let k = element_stiffness(p);
        for i in 0..3 {
            mass_bulk[tri[i]] += area / 3.0;
            for j in 0..3 {
                stiff_trip.push((tri[i], tri[j], k[i][j]));
            }
        }
    }
    let stiff_bulk = SparseMat::from_triplets(n, n, &stiff_trip)?;

    let trace_map = mesh.boundary_nodes.clone();
    let n_surf = trace_map.len();
    let surf_of = surf_index_map(mesh);
    let mut mass_surf = vec![0.0; n_surf];
    let mut surf_trip = Vec::with_capacity(4 * n_surf);
    for ([a, b], _) in &mesh.boundary_edges {
        let (sa, sb) = (surf_of[*a].unwrap(), surf_of[*b].unwrap());
        let len = {
            let (pa, pb) = (mesh.nodes[*a], mesh.nodes[*b]);
            ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt()
        };
        mass_surf[sa] += 0.5 * len;
        mass_surf[sb] += 0.5 * len;
        let w = 1.0 / len;
        surf_trip.push((sa, sa, w));
        surf_trip.push((sb, sb, w));
        surf_trip.push((sa, sb, -w));
        surf_trip.push((sb, sa, -w));
    }
    let stiff_surf = SparseMat::from_triplets(n_surf, n_surf, &surf_trip)?;

    let neumann_mat = neumann_trace_matrix(mesh)?;

    Ok(FemOperators {
        mass_bulk,
        stiff_bulk,
        mass_surf,
        stiff_surf,
        trace_map,
        neumann_mat,
    })
}

/// Edge-flux matrix: row i, column j holds the integrals of (grad phi_j . n)
/// phi_i over the boundary edges adjacent to surface node i, with the gradient
/// taken from the triangle owning each edge. The integrand is constant times a
/// linear hat, so edge integrals are exact.
pub fn neumann_trace_matrix(mesh: &TriMesh) -> Result<SparseMat> {
    let surf_of = surf_index_map(mesh);
    let n_surf = mesh.boundary_nodes.len();
    let mut trip = Vec::new();
    for ([a, b], t) in &mesh.boundary_edges {
        let (pa, pb) = (mesh.nodes[*a], mesh.nodes[*b]);
        let d = [pb[0] - pa[0], pb[1] - pa[1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        // boundary runs counterclockwise, so the outward normal is the
        // direction rotated by -90 degrees
        let normal = [d[1] / len, -d[0] / len];
        let p = mesh.triangle_nodes(*t);
        let (_, grads) = p1_gradients(p);
        for (local, &j) in mesh.triangles[*t].iter().enumerate() {
            let flux = grads[local][0] * normal[0] + grads[local][1] * normal[1];
            for &node in &[*a, *b] {
                let i = surf_of[node].unwrap();
                trip.push((i, j, flux * 0.5 * len));
            }
        }
    }
    SparseMat::from_triplets(n_surf, mesh.n_nodes(), &trip)
}

/// Bulk load vector with components approximating the integrals of
/// f(., t) phi_i over the polygonal domain.
pub fn load_vector_bulk(mesh: &TriMesh, f: impl Fn([f64; 2], f64) -> f64, t: f64) -> Vec<f64> {
    let mut load = vec![0.0; mesh.n_nodes()];
    for (tri_idx, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.triangle_nodes(tri_idx);
        let area = signed_area(p[0], p[1], p[2]);
        for &(l1, l2, w) in &TRI_QUAD_D4 {
            let l3 = 1.0 - l1 - l2;
            let bary = [l1, l2, l3];
            let x = [
                l1 * p[0][0] + l2 * p[1][0] + l3 * p[2][0],
                l1 * p[0][1] + l2 * p[1][1] + l3 * p[2][1],
            ];
            let fv = f(x, t);
            for i in 0..3 {
                load[tri[i]] += w * area * fv * bary[i];
            }
        }
    }
    load
}

/// Surface load vector; `g` takes the boundary angle of the quadrature point.
pub fn load_vector_surf(mesh: &TriMesh, g: impl Fn(f64, f64) -> f64, t: f64) -> Vec<f64> {
    let surf_of = surf_index_map(mesh);
    let mut load = vec![0.0; mesh.boundary_nodes.len()];
    for ([a, b], _) in &mesh.boundary_edges {
        let (pa, pb) = (mesh.nodes[*a], mesh.nodes[*b]);
        let len = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        let (sa, sb) = (surf_of[*a].unwrap(), surf_of[*b].unwrap());
        for &(xi, w) in &GAUSS3 {
            let s = 0.5 * (1.0 + xi);
            let x = [(1.0 - s) * pa[0] + s * pb[0], (1.0 - s) * pa[1] + s * pb[1]];
            let theta = x[1].atan2(x[0]);
            let gv = g(theta, t);
            load[sa] += 0.5 * w * len * gv * (1.0 - s);
            load[sb] += 0.5 * w * len * gv * s;
        }
    }
    load
}
