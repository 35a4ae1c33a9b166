//! Metric measure complexes: weighted graphs with vertex masses, edge
//! conductances, lengths and dual perimeter weights.

mod builders;
mod distance;
mod io;

pub use builders::{
    build_cone, build_doubled_triangle, build_interval, build_interval_between, build_product,
    build_rectangle,
};
pub use distance::{
    annulus, ball, closed_ball, cone_distance, geodesic_distances, intrinsic_distances,
    shell_measure, DistanceField, ShellMeasure,
};
pub use io::MeshFile;

use crate::error::{Error, Result};
use crate::numeric::csum;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    /// Conductance.
    pub w: f64,
    /// Length.
    pub len: f64,
    /// Dual (perimeter) weight.
    pub per: f64,
}

/// Length-only edge used by graph distances (zero-conductance mesh diagonals
/// and similar short cuts).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shortcut {
    pub i: usize,
    pub j: usize,
    pub len: f64,
}

/// Builder-provided coordinate structure that enables exact intrinsic
/// distances and structured interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Chart {
    /// No global chart; distances are graph distances.
    Graph,
    /// Vertex coordinates are isometric Euclidean coordinates.
    Euclidean,
    /// Structured metric cone: vertex 0 is the apex, ring `i` (1-based) at
    /// radius `i * rmax / nr` holds `ntheta` vertices at angles `j * angle / ntheta`.
    Cone {
        angle: f64,
        rmax: f64,
        nr: usize,
        ntheta: usize,
    },
    /// Tensor product `line x fiber`; vertex `(t, y)` has index `t * n_fiber + y`.
    Product {
        n_line: usize,
        n_fiber: usize,
        line_coords: Vec<f64>,
        fiber: Box<MetricComplex>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricComplex {
    masses: Vec<f64>,
    coords: Vec<Vec<f64>>,
    edges: Vec<Edge>,
    shortcuts: Vec<Shortcut>,
    boundary: Vec<bool>,
    triangles: Vec<[usize; 3]>,
    intrinsic_dim: usize,
    curvature_bound: f64,
    description: String,
    chart: Chart,
    // CSR adjacency over conductance edges: (neighbor, edge index)
    adj_start: Vec<usize>,
    adj: Vec<(usize, usize)>,
}

/// Raw parts accepted by [`MetricComplex::from_parts`].
#[derive(Debug, Clone)]
pub struct ComplexParts {
    pub masses: Vec<f64>,
    pub coords: Vec<Vec<f64>>,
    pub edges: Vec<Edge>,
    pub shortcuts: Vec<Shortcut>,
    pub boundary: Vec<bool>,
    pub triangles: Vec<[usize; 3]>,
    pub intrinsic_dim: usize,
    pub curvature_bound: f64,
    pub description: String,
    pub chart: Chart,
}

impl MetricComplex {
    /// Validates and assembles a complex. Edges are normalized to `i < j` and
    /// sorted lexicographically.
    pub fn from_parts(parts: ComplexParts) -> Result<Self> {
        let ComplexParts {
            masses,
            coords,
            mut edges,
            mut shortcuts,
            boundary,
            triangles,
            intrinsic_dim,
            curvature_bound,
            description,
            chart,
        } = parts;
        let n = masses.len();
        if n == 0 {
            return Err(Error::param("complex has no vertices"));
        }
        if boundary.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "boundary markers {} != vertices {n}",
                boundary.len()
            )));
        }
        if !coords.is_empty() && coords.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "coordinates {} != vertices {n}",
                coords.len()
            )));
        }
        if intrinsic_dim == 0 {
            return Err(Error::param("intrinsic dimension must be positive"));
        }
        if !(curvature_bound <= 0.0) {
            return Err(Error::param(format!(
                "curvature bound {curvature_bound} must be <= 0"
            )));
        }
        if let Some(v) = masses.iter().position(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::param(format!(
                "vertex {v} has non-positive mass {}",
                masses[v]
            )));
        }
        for e in edges.iter_mut() {
            if e.i == e.j {
                return Err(Error::param(format!("self-loop at vertex {}", e.i)));
            }
            if e.i >= n || e.j >= n {
                return Err(Error::param(format!(
                    "edge ({}, {}) out of range",
                    e.i, e.j
                )));
            }
            if !(e.w > 0.0 && e.len > 0.0 && e.per >= 0.0) || !e.w.is_finite() {
                return Err(Error::param(format!(
                    "edge ({}, {}) has invalid weights w={} len={} per={}",
                    e.i, e.j, e.w, e.len, e.per
                )));
            }
            if e.i > e.j {
                std::mem::swap(&mut e.i, &mut e.j);
            }
        }
        edges.sort_by_key(|e| (e.i, e.j));
        if edges
            .windows(2)
            .any(|p| (p[0].i, p[0].j) == (p[1].i, p[1].j))
        {
            return Err(Error::param("duplicate edge"));
        }
        for s in shortcuts.iter_mut() {
            if s.i == s.j || s.i >= n || s.j >= n || !(s.len > 0.0) {
                return Err(Error::param(format!(
                    "invalid short-cut edge ({}, {})",
                    s.i, s.j
                )));
            }
            if s.i > s.j {
                std::mem::swap(&mut s.i, &mut s.j);
            }
        }
        shortcuts.sort_by_key(|s| (s.i, s.j));
        shortcuts.dedup_by_key(|s| (s.i, s.j));

        let mut degree = vec![0usize; n + 1];
        for e in &edges {
            degree[e.i + 1] += 1;
            degree[e.j + 1] += 1;
        }
        for v in 0..n {
            degree[v + 1] += degree[v];
        }
        let adj_start = degree.clone();
        let mut fill = degree;
        let mut adj = vec![(0usize, 0usize); 2 * edges.len()];
        for (k, e) in edges.iter().enumerate() {
            adj[fill[e.i]] = (e.j, k);
            fill[e.i] += 1;
            adj[fill[e.j]] = (e.i, k);
            fill[e.j] += 1;
        }

        let complex = Self {
            masses,
            coords,
            edges,
            shortcuts,
            boundary,
            triangles,
            intrinsic_dim,
            curvature_bound,
            description,
            chart,
            adj_start,
            adj,
        };
        complex.check_interior_connected()?;
        Ok(complex)
    }

    fn check_interior_connected(&self) -> Result<()> {
        let n = self.num_vertices();
        let Some(start) = (0..n).find(|&v| !self.boundary[v]) else {
            return Err(Error::param("interior vertex set is empty"));
        };
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(u, _) in self.neighbors(v) {
                if !seen[u] && !self.boundary[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        let interior = self.boundary.iter().filter(|b| !**b).count();
        if count != interior {
            return Err(Error::param(format!(
                "interior is disconnected ({count} of {interior} vertices reachable)"
            )));
        }
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.masses.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, v: usize) -> f64 {
        self.masses[v]
    }

    pub fn total_mass(&self) -> f64 {
        csum(self.masses.iter().copied())
    }

    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    pub fn coord(&self, v: usize) -> Option<&[f64]> {
        self.coords.get(v).map(|c| c.as_slice())
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn shortcuts(&self) -> &[Shortcut] {
        &self.shortcuts
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices())
            .filter(|&v| self.boundary[v])
            .collect()
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices())
            .filter(|&v| !self.boundary[v])
            .collect()
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn curvature_bound(&self) -> f64 {
        self.curvature_bound
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// `(neighbor, edge index)` pairs of `v` over conductance edges.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[self.adj_start[v]..self.adj_start[v + 1]]
    }

    /// Sum of incident conductances.
    pub fn weighted_degree(&self, v: usize) -> f64 {
        self.neighbors(v)
            .iter()
            .map(|&(_, k)| self.edges[k].w)
            .sum()
    }

    /// Typical mesh size: the largest edge length.
    pub fn mesh_size(&self) -> f64 {
        self.edges.iter().map(|e| e.len).fold(0.0, f64::max)
    }

    /// Graph Laplacian `(Lu)_v = sum_e w_e (u_v - u_nbr)`; the negative of the
    /// analyst's Laplacian.
    pub fn apply_laplacian(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.num_vertices());
        (0..self.num_vertices())
            .map(|v| {
                csum(
                    self.neighbors(v)
                        .iter()
                        .map(|&(n, k)| self.edges[k].w * (u[v] - u[n])),
                )
            })
            .collect()
    }

    /// `sum_e w_e (u_i - u_j)^2` for a scalar field.
    pub fn dirichlet_energy(&self, u: &[f64]) -> f64 {
        assert_eq!(u.len(), self.num_vertices());
        csum(self.edges.iter().map(|e| {
            let d = u[e.i] - u[e.j];
            e.w * d * d
        }))
    }

    /// Dirichlet pairing `sum_e w_e (phi_i - phi_j)(u_i - u_j)`.
    pub fn dirichlet_pairing(&self, phi: &[f64], u: &[f64]) -> f64 {
        csum(
            self.edges
                .iter()
                .map(|e| e.w * (phi[e.i] - phi[e.j]) * (u[e.i] - u[e.j])),
        )
    }

    /// Euler characteristic of the triangulation (vertices - edges + faces).
    /// A vertex pair shared by more than two faces (glued sheets) counts as
    /// several edges, one per pair of incident faces.
    pub fn euler_characteristic(&self) -> Option<i64> {
        if self.triangles.is_empty() {
            return None;
        }
        let mut faces_per_pair: HashMap<(usize, usize), i64> = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[0], t[2])] {
                *faces_per_pair.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let edges: i64 = faces_per_pair.values().map(|c| (c + 1) / 2).sum();
        Some(self.num_vertices() as i64 - edges + self.triangles.len() as i64)
    }

    /// Total interior angle of the triangles incident to `v`.
    pub fn angle_sum(&self, v: usize) -> f64 {
        let mut lens: HashMap<(usize, usize), f64> = HashMap::new();
        for e in &self.edges {
            lens.insert((e.i, e.j), e.len);
        }
        for s in &self.shortcuts {
            lens.entry((s.i, s.j)).or_insert(s.len);
        }
        let len = |a: usize, b: usize| lens[&(a.min(b), a.max(b))];
        let mut total = 0.0;
        for t in self.triangles.iter().filter(|t| t.contains(&v)) {
            let others: Vec<usize> = t.iter().copied().filter(|&x| x != v).collect();
            let (a, b) = (len(v, others[0]), len(v, others[1]));
            let c = len(others[0], others[1]);
            total += ((a * a + b * b - c * c) / (2.0 * a * b))
                .clamp(-1.0, 1.0)
                .acos();
        }
        total
    }

    /// Rescales the metric by `1/a` and the measure by `b`: lengths `len/a`,
    /// masses `b m`, conductances `a^2 b w`, perimeter weights `a b p`.
    pub fn rescaled(&self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::param("rescale factors must be positive"));
        }
        let chart = match &self.chart {
            Chart::Cone {
                angle,
                rmax,
                nr,
                ntheta,
            } => Chart::Cone {
                angle: *angle,
                rmax: rmax / a,
                nr: *nr,
                ntheta: *ntheta,
            },
            Chart::Product {
                n_line,
                n_fiber,
                line_coords,
                fiber,
            } => Chart::Product {
                n_line: *n_line,
                n_fiber: *n_fiber,
                line_coords: line_coords.iter().map(|t| t / a).collect(),
                fiber: Box::new(fiber.rescaled(a, 1.0)?),
            },
            other => other.clone(),
        };
        MetricComplex::from_parts(ComplexParts {
            masses: self.masses.iter().map(|m| m * b).collect(),
            coords: self
                .coords
                .iter()
                .map(|c| c.iter().map(|x| x / a).collect())
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    i: e.i,
                    j: e.j,
                    w: e.w * a * a * b,
                    len: e.len / a,
                    per: e.per * a * b,
                })
                .collect(),
            shortcuts: self
                .shortcuts
                .iter()
                .map(|s| Shortcut {
                    len: s.len / a,
                    ..*s
                })
                .collect(),
            boundary: self.boundary.clone(),
            triangles: self.triangles.clone(),
            intrinsic_dim: self.intrinsic_dim,
            curvature_bound: self.curvature_bound * a * a,
            description: format!("{} rescaled(a={a}, b={b})", self.description),
            chart,
        })
    }

    /// Polar coordinates `(r, theta)` of a vertex on a cone chart.
    pub fn cone_polar(&self, v: usize) -> Option<(f64, f64)> {
        match self.chart {
            Chart::Cone {
                angle,
                rmax,
                nr,
                ntheta,
            } => {
                if v == 0 {
                    return Some((0.0, 0.0));
                }
                let ring = (v - 1) / ntheta + 1;
                let j = (v - 1) % ntheta;
                Some((
                    ring as f64 * rmax / nr as f64,
                    j as f64 * angle / ntheta as f64,
                ))
            }
            _ => None,
        }
    }

    /// Nearest vertex to a chart point (Euclidean distance in coordinates).
    pub fn nearest_vertex(&self, point: &[f64]) -> Option<usize> {
        if self.coords.is_empty() {
            return None;
        }
        let d2 = |c: &[f64]| -> f64 { c.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum() };
        (0..self.num_vertices()).min_by(|&a, &b| {
            d2(&self.coords[a])
                .partial_cmp(&d2(&self.coords[b]))
                .unwrap()
                .then(a.cmp(&b))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parts_two_vertices() -> ComplexParts {
        ComplexParts {
            masses: vec![1.0, 1.0, 1.0],
            coords: vec![],
            edges: vec![
                Edge {
                    i: 0,
                    j: 1,
                    w: 1.0,
                    len: 1.0,
                    per: 1.0,
                },
                Edge {
                    i: 1,
                    j: 2,
                    w: 1.0,
                    len: 1.0,
                    per: 1.0,
                },
            ],
            shortcuts: vec![],
            boundary: vec![true, false, true],
            triangles: vec![],
            intrinsic_dim: 1,
            curvature_bound: 0.0,
            description: "test".into(),
            chart: Chart::Graph,
        }
    }

    #[test]
    fn rejects_bad_parts() {
        let mut p = parts_two_vertices();
        p.masses[1] = 0.0;
        assert!(MetricComplex::from_parts(p).is_err());

        let mut p = parts_two_vertices();
        p.edges[0].j = 0;
        assert!(MetricComplex::from_parts(p).is_err());

        let mut p = parts_two_vertices();
        p.boundary = vec![true, true, true];
        assert!(MetricComplex::from_parts(p).is_err());

        let mut p = parts_two_vertices();
        p.curvature_bound = 1.0;
        assert!(MetricComplex::from_parts(p).is_err());

        let mut p = parts_two_vertices();
        p.edges.push(Edge {
            i: 1,
            j: 0,
            w: 1.0,
            len: 1.0,
            per: 1.0,
        });
        assert!(MetricComplex::from_parts(p).is_err());
    }

    #[test]
    fn edges_are_normalized() {
        let mut p = parts_two_vertices();
        p.edges.reverse();
        p.edges[0] = Edge {
            i: 2,
            j: 1,
            w: 1.0,
            len: 1.0,
            per: 1.0,
        };
        let c = MetricComplex::from_parts(p).unwrap();
        assert_eq!((c.edges()[0].i, c.edges()[0].j), (0, 1));
        assert_eq!((c.edges()[1].i, c.edges()[1].j), (1, 2));
        assert_eq!(c.neighbors(1).len(), 2);
    }
}
