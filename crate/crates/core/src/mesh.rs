//! Triangulations of the unit disk with explicit boundary structure.
//!
//! The generator places rings of nodes at radii j/J (6j nodes on ring j, so
//! spacing is close to uniform), triangulates consecutive rings with a
//! two-pointer strip, and relaxes interior nodes by Laplacian smoothing while
//! boundary nodes stay exactly on the circle.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TriMesh {
    /// node coordinates, disk of radius 1 centered at the origin
    pub nodes: Vec<[f64; 2]>,
    /// counterclockwise node-index triples
    pub triangles: Vec<[usize; 3]>,
    /// (node pair, adjacent triangle), ordered counterclockwise around the boundary
    pub boundary_edges: Vec<([usize; 2], usize)>,
    /// sorted node indices on the boundary circle
    pub boundary_nodes: Vec<usize>,
    /// mesh width: maximum triangle diameter
    pub h: f64,
}

pub fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl TriMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_nodes.len()
    }

    pub fn triangle_nodes(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_nodes(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    pub fn triangle_diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_nodes(t);
        dist(a, b).max(dist(b, c)).max(dist(c, a))
    }

    pub fn triangle_inradius(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_nodes(t);
        let (la, lb, lc) = (dist(b, c), dist(c, a), dist(a, b));
        2.0 * signed_area(a, b, c) / (la + lb + lc)
    }

    /// Boundary angle of a boundary node (atan2 convention).
    pub fn node_angle(&self, node: usize) -> f64 {
        self.nodes[node][1].atan2(self.nodes[node][0])
    }

    /// Shape regularity: max diameter over min inradius.
    pub fn regularity(&self) -> f64 {
        let max_d = (0..self.triangles.len())
            .map(|t| self.triangle_diameter(t))
            .fold(0.0, f64::max);
        let min_r = (0..self.triangles.len())
            .map(|t| self.triangle_inradius(t))
            .fold(f64::INFINITY, f64::min);
        max_d / min_r
    }

    /// Check all structural invariants; used by the generator and the tests.
    pub fn validate(&self) -> Result<()> {
        for (t, _) in self.triangles.iter().enumerate() {
            if self.triangle_area(t) <= 0.0 {
                return Err(Error::MeshGeneration(format!(
                    "triangle {t} with nodes {:?} has nonpositive area {:.3e}",
                    self.triangles[t],
                    self.triangle_area(t)
                )));
            }
        }
        for &b in &self.boundary_nodes {
            let r = (self.nodes[b][0].powi(2) + self.nodes[b][1].powi(2)).sqrt();
            if (r - 1.0).abs() > 1e-12 {
                return Err(Error::MeshGeneration(format!(
                    "boundary node {b} lies at radius {r}"
                )));
            }
        }
        // edge incidence counts
        let mut incidence: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *incidence.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let boundary_set: std::collections::HashSet<(usize, usize)> = self
            .boundary_edges
            .iter()
            .map(|([a, b], _)| (*a.min(b), *a.max(b)))
            .collect();
        for (&edge, &count) in &incidence {
            let expected = if boundary_set.contains(&edge) { 1 } else { 2 };
            if count != expected {
                return Err(Error::MeshGeneration(format!(
                    "edge {edge:?} belongs to {count} triangles, expected {expected}"
                )));
            }
        }
        for ([a, b], t) in &self.boundary_edges {
            if !self.triangles[*t].contains(a) || !self.triangles[*t].contains(b) {
                return Err(Error::MeshGeneration(format!(
                    "boundary edge ({a},{b}) does not belong to triangle {t}"
                )));
            }
        }
        // counterclockwise closed traversal covering each boundary node once
        let mut seen = std::collections::HashSet::new();
        for (k, ([a, b], _)) in self.boundary_edges.iter().enumerate() {
            let next = self.boundary_edges[(k + 1) % self.boundary_edges.len()].0[0];
            if *b != next {
                return Err(Error::MeshGeneration(
                    "boundary edges do not chain into a closed loop".into(),
                ));
            }
            if !seen.insert(*a) {
                return Err(Error::MeshGeneration(format!(
                    "boundary traversal visits node {a} twice"
                )));
            }
            let cross =
                self.nodes[*a][0] * self.nodes[*b][1] - self.nodes[*a][1] * self.nodes[*b][0];
            if cross <= 0.0 {
                return Err(Error::MeshGeneration(
                    "boundary edge oriented clockwise".into(),
                ));
            }
        }
        if seen.len() != self.boundary_nodes.len() {
            return Err(Error::MeshGeneration(
                "boundary traversal does not cover every boundary node".into(),
            ));
        }
        if self.regularity() > 10.0 {
            return Err(Error::MeshGeneration(format!(
                "shape regularity {:.2} exceeds 10",
                self.regularity()
            )));
        }
        Ok(())
    }

    /// Plain-text export: header `nodes N triangles T boundary_edges E`,
    /// then N coordinate lines, T triangle lines, E boundary-edge lines.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "nodes {} triangles {} boundary_edges {}",
            self.nodes.len(),
            self.triangles.len(),
            self.boundary_edges.len()
        )
        .unwrap();
        for n in &self.nodes {
            writeln!(out, "{} {}", n[0], n[1]).unwrap();
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        for ([a, b], t) in &self.boundary_edges {
            writeln!(out, "{a} {b} {t}").unwrap();
        }
        out
    }
}

/// Triangulate the annulus between two rings of node indices (ordered by
/// ascending angle, both starting at angle 0). Returns index triples, not yet
/// oriented.
fn annulus_strip(inner: &[usize], outer: &[usize]) -> Vec<[usize; 3]> {
    let (n_in, n_out) = (inner.len(), outer.len());
    let angle_in = |i: usize| 2.0 * PI * i as f64 / n_in as f64;
    let angle_out = |o: usize| 2.0 * PI * o as f64 / n_out as f64;
    let mut tris = Vec::with_capacity(n_in + n_out);
    let (mut i, mut o) = (0usize, 0usize);
    while i < n_in || o < n_out {
        let advance_outer = if o == n_out {
            false
        } else if i == n_in {
            true
        } else {
            angle_out(o + 1) <= angle_in(i + 1)
        };
        if advance_outer {
            tris.push([inner[i % n_in], outer[o], outer[(o + 1) % n_out]]);
            o += 1;
        } else {
            tris.push([inner[i], outer[o % n_out], inner[(i + 1) % n_in]]);
            i += 1;
        }
    }
    tris
}

/// Build a quasi-uniform triangulation of the unit disk with mesh width at
/// most 1.5 * h_target.
pub fn build_disk_mesh(h_target: f64) -> Result<TriMesh> {
    if !(h_target > 0.0 && h_target <= 1.0) {
        return Err(Error::MeshGeneration(format!(
            "h_target must lie in (0, 1], got {h_target}"
        )));
    }
    // the longest edges are the strip diagonals, about 1.45/rings
    let rings = ((1.45 / h_target).round() as usize).max(1);

    let mut nodes: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    let mut ring_index: Vec<Vec<usize>> = vec![vec![0]];
    for j in 1..=rings {
        let r = j as f64 / rings as f64;
        let count = 6 * j;
        let mut ring = Vec::with_capacity(count);
        for m in 0..count {
            let angle = 2.0 * PI * m as f64 / count as f64;
            ring.push(nodes.len());
            nodes.push([r * angle.cos(), r * angle.sin()]);
        }
        ring_index.push(ring);
    }

    let mut triangles: Vec<[usize; 3]> = Vec::new();
    // center fan
    for m in 0..6 {
        triangles.push([0, ring_index[1][m], ring_index[1][(m + 1) % 6]]);
    }
    for j in 1..rings {
        triangles.extend(annulus_strip(&ring_index[j], &ring_index[j + 1]));
    }
    // enforce counterclockwise orientation
    for tri in &mut triangles {
        if signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]) < 0.0 {
            tri.swap(1, 2);
        }
    }

    let boundary_ring = ring_index[rings].clone();
    let n_boundary = boundary_ring.len();
    let is_boundary: Vec<bool> = (0..nodes.len()).map(|i| i >= boundary_ring[0]).collect();

    // Laplacian smoothing of interior nodes, boundary fixed on the circle
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for tri in &triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
        nb.dedup();
    }
    let omega = 0.5;
    for _ in 0..8 {
        let snapshot = nodes.clone();
        for (i, pos) in nodes.iter_mut().enumerate() {
            if is_boundary[i] || neighbors[i].is_empty() {
                continue;
            }
            let mut mean = [0.0, 0.0];
            for &nb in &neighbors[i] {
                mean[0] += snapshot[nb][0];
                mean[1] += snapshot[nb][1];
            }
            let inv = 1.0 / neighbors[i].len() as f64;
            pos[0] = (1.0 - omega) * snapshot[i][0] + omega * mean[0] * inv;
            pos[1] = (1.0 - omega) * snapshot[i][1] + omega * mean[1] * inv;
        }
    }

    // boundary edges with their owning triangle
    let mut edge_owner: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            edge_owner.entry((a.min(b), a.max(b))).or_default().push(t);
        }
    }
    let mut boundary_edges = Vec::with_capacity(n_boundary);
    for m in 0..n_boundary {
        let a = boundary_ring[m];
        let b = boundary_ring[(m + 1) % n_boundary];
        let owners = edge_owner
            .get(&(a.min(b), a.max(b)))
            .ok_or_else(|| Error::MeshGeneration(format!("missing boundary edge ({a},{b})")))?;
        if owners.len() != 1 {
            return Err(Error::MeshGeneration(format!(
                "boundary edge ({a},{b}) has {} owners",
                owners.len()
            )));
        }
        boundary_edges.push(([a, b], owners[0]));
    }

    let mut h = 0.0_f64;
    for tri in &triangles {
        for k in 0..3 {
            h = h.max(dist(nodes[tri[k]], nodes[tri[(k + 1) % 3]]));
        }
    }

    let mesh = TriMesh {
        nodes,
        triangles,
        boundary_edges,
        boundary_nodes: boundary_ring,
        h,
    };
    mesh.validate()?;
    if mesh.h > 1.5 * h_target {
        return Err(Error::MeshGeneration(format!(
            "generated mesh width {} exceeds 1.5 * {h_target}",
            mesh.h
        )));
    }
    Ok(mesh)
}

/// Meshes with widths following h0 * 2^(-k/2), regenerated per level so
/// boundary nodes stay exactly on the circle.
pub fn refine_sequence(h0: f64, levels: usize) -> Result<Vec<TriMesh>> {
    if levels == 0 {
        return Err(Error::Config("refine_sequence needs levels >= 1".into()));
    }
    (0..levels)
        .map(|k| build_disk_mesh(h0 / 2f64.powf(k as f64 / 2.0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_mesh_is_minimal_but_valid() {
        let mesh = build_disk_mesh(1.0).unwrap();
        assert!(mesh.triangles.len() >= 4);
        mesh.validate().unwrap();
    }

    #[test]
    fn area_approaches_pi() {
        let mesh = build_disk_mesh(0.4).unwrap();
        assert!(
            (mesh.total_area() - PI).abs() < 0.05,
            "area {}",
            mesh.total_area()
        );
    }

    #[test]
    fn boundary_edge_count_tracks_circumference() {
        let mesh = build_disk_mesh(0.2).unwrap();
        let expected = 2.0 * PI / mesh.h;
        let count = mesh.boundary_edges.len() as f64;
        assert!(
            count > expected / 2.0 && count < expected * 2.0,
            "count {count} expected ~{expected}"
        );
    }

    #[test]
    fn refine_sequence_single_level() {
        let seq = refine_sequence(0.4, 1).unwrap();
        assert_eq!(seq.len(), 1);
        assert!((seq[0].h - 0.4).abs() <= 0.25 * 0.4);
    }

    #[test]
    fn refine_sequence_tracks_target_widths_and_node_growth() {
        let seq = refine_sequence(0.4, 5).unwrap();
        for (k, mesh) in seq.iter().enumerate() {
            let target = 0.4 / 2f64.powf(k as f64 / 2.0);
            assert!(
                (mesh.h - target).abs() <= 0.25 * target,
                "level {k}: h {} target {target}",
                mesh.h
            );
            mesh.validate().unwrap();
        }
        for pair in seq.windows(2) {
            let ratio = pair[1].n_nodes() as f64 / pair[0].n_nodes() as f64;
            assert!(ratio > 1.4 && ratio < 2.8, "node growth {ratio}");
            let h_ratio = pair[1].h / pair[0].h;
            let target = 1.0 / 2f64.sqrt();
            assert!(
                h_ratio >= target * 0.75 && h_ratio <= target * 1.25,
                "h ratio {h_ratio}"
            );
        }
    }

    #[test]
    fn area_error_is_second_order_and_monotone() {
        let seq = refine_sequence(0.5, 4).unwrap();
        let mut last_gap = f64::INFINITY;
        for mesh in &seq {
            let gap = PI - mesh.total_area();
            assert!(gap > 0.0, "polygonal area must stay below pi");
            assert!(gap < last_gap, "area must increase monotonically");
            assert!(
                gap <= 0.6 * mesh.h * mesh.h,
                "gap {gap} vs h^2 {}",
                mesh.h * mesh.h
            );
            last_gap = gap;
        }
    }

    #[test]
    fn quasi_uniformity_across_sequence() {
        for mesh in refine_sequence(0.4, 5).unwrap() {
            assert!(
                mesh.regularity() <= 10.0,
                "regularity {}",
                mesh.regularity()
            );
        }
    }

    #[test]
    fn rejects_bad_h_target() {
        assert!(build_disk_mesh(0.0).is_err());
        assert!(build_disk_mesh(1.2).is_err());
    }

    #[test]
    fn export_line_counts_match_header() {
        let mesh = build_disk_mesh(0.7).unwrap();
        let text = mesh.export_text();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split_whitespace().collect();
        assert_eq!(header[0], "nodes");
        let n: usize = header[1].parse().unwrap();
        let t: usize = header[3].parse().unwrap();
        let e: usize = header[5].parse().unwrap();
        assert_eq!(lines.count(), n + t + e);
    }
}
