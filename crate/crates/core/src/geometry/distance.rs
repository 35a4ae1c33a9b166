//! Distances from a source vertex, balls, annuli and shell measures.

use super::{Chart, MetricComplex};
use crate::error::{Error, Result};
use crate::numeric::csum;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub source: usize,
    pub dist: Vec<f64>,
}

impl DistanceField {
    /// Number of vertices not reachable from the source.
    pub fn unreachable(&self) -> usize {
        self.dist.iter().filter(|d| d.is_infinite()).count()
    }

    pub fn get(&self, v: usize) -> f64 {
        self.dist[v]
    }
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (distance, vertex)
        other
            .0
            .partial_cmp(&self.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path distance over edge lengths (conductance edges plus short
/// cuts). Unreachable vertices get `+inf`.
pub fn geodesic_distances(complex: &MetricComplex, x0: usize) -> Result<DistanceField> {
    let n = complex.num_vertices();
    if x0 >= n {
        return Err(Error::param(format!("source vertex {x0} out of range")));
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in complex.edges() {
        adj[e.i].push((e.j, e.len));
        adj[e.j].push((e.i, e.len));
    }
    for s in complex.shortcuts() {
        adj[s.i].push((s.j, s.len));
        adj[s.j].push((s.i, s.len));
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[x0] = 0.0;
    heap.push(Item(0.0, x0));
    while let Some(Item(d, v)) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        for &(u, len) in &adj[v] {
            let nd = d + len;
            if nd < dist[u] {
                dist[u] = nd;
                heap.push(Item(nd, u));
            }
        }
    }
    let field = DistanceField { source: x0, dist };
    let missing = field.unreachable();
    if missing > 0 {
        log::warn!("{missing} vertices unreachable from {x0}");
    }
    Ok(field)
}

/// Intrinsic distance from `x0`: exact closed forms on Euclidean, cone and
/// product charts, graph distance otherwise.
pub fn intrinsic_distances(complex: &MetricComplex, x0: usize) -> Result<DistanceField> {
    let n = complex.num_vertices();
    if x0 >= n {
        return Err(Error::param(format!("source vertex {x0} out of range")));
    }
    let dist = match complex.chart() {
        Chart::Graph => return geodesic_distances(complex, x0),
        Chart::Euclidean => {
            let p0 = &complex.coords()[x0];
            complex
                .coords()
                .iter()
                .map(|p| {
                    p.iter()
                        .zip(p0)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        }
        Chart::Cone { angle, .. } => {
            let (r0, t0) = complex.cone_polar(x0).unwrap();
            (0..n)
                .map(|v| {
                    let (r, t) = complex.cone_polar(v).unwrap();
                    cone_distance(*angle, r0, t0, r, t)
                })
                .collect()
        }
        Chart::Product {
            n_fiber,
            line_coords,
            fiber,
            ..
        } => {
            let (t0, y0) = (x0 / n_fiber, x0 % n_fiber);
            let df = intrinsic_distances(fiber, y0)?;
            (0..n)
                .map(|v| {
                    let (t, y) = (v / n_fiber, v % n_fiber);
                    let dt = line_coords[t] - line_coords[t0];
                    (dt * dt + df.dist[y] * df.dist[y]).sqrt()
                })
                .collect()
        }
    };
    Ok(DistanceField { source: x0, dist })
}

/// Distance between polar points on the flat cone over a circle of length `angle`.
pub fn cone_distance(angle: f64, r0: f64, t0: f64, r: f64, t: f64) -> f64 {
    let mut d = (t - t0).abs() % angle;
    d = d.min(angle - d);
    if d < PI {
        let s = (0.5 * d).sin();
        ((r - r0) * (r - r0) + 4.0 * r * r0 * s * s).sqrt()
    } else {
        r + r0
    }
}

/// Open ball `{v : dist(v) < r}`.
pub fn ball(dist: &DistanceField, r: f64) -> Vec<usize> {
    (0..dist.dist.len()).filter(|&v| dist.dist[v] < r).collect()
}

/// Closed ball `{v : dist(v) <= r}` (with a relative slack of 1e-12 so that
/// vertices exactly at distance `r` are not lost to rounding).
pub fn closed_ball(dist: &DistanceField, r: f64) -> Vec<usize> {
    let r = r * (1.0 + 1e-12);
    (0..dist.dist.len())
        .filter(|&v| dist.dist[v] <= r)
        .collect()
}

/// Annulus `{v : r1 <= dist(v) < r2}`.
pub fn annulus(dist: &DistanceField, r1: f64, r2: f64) -> Vec<usize> {
    (0..dist.dist.len())
        .filter(|&v| dist.dist[v] >= r1 && dist.dist[v] < r2)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellMeasure {
    pub value: f64,
    /// Set when the shell contains no vertex.
    pub empty: bool,
}

/// `(1/dr) * sum of masses with r <= dist < r + dr`; a coarea approximation
/// of the perimeter of `B_r`.
pub fn shell_measure(
    complex: &MetricComplex,
    dist: &DistanceField,
    r: f64,
    dr: f64,
) -> Result<ShellMeasure> {
    if !(r >= 0.0 && dr > 0.0) {
        return Err(Error::param(format!(
            "shell needs r >= 0 and dr > 0, got r={r}, dr={dr}"
        )));
    }
    let verts = annulus(dist, r, r + dr);
    if verts.is_empty() {
        log::warn!("empty shell at r={r}, dr={dr}");
        return Ok(ShellMeasure {
            value: 0.0,
            empty: true,
        });
    }
    Ok(ShellMeasure {
        value: csum(verts.iter().map(|&v| complex.mass(v))) / dr,
        empty: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cone, build_interval, build_rectangle};
    use crate::numeric::trapezoid;

    #[test]
    fn chain_distances() {
        let c = build_interval(5, 1.0).unwrap();
        let d = geodesic_distances(&c, 0).unwrap();
        assert_eq!(d.dist, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(geodesic_distances(&c, 9).is_err());
    }

    #[test]
    fn graph_and_chart_distances_agree_on_axes() {
        let c = build_rectangle(17, 17, 1.0, 1.0).unwrap();
        let center = 8 * 17 + 8;
        let g = geodesic_distances(&c, center).unwrap();
        let e = intrinsic_distances(&c, center).unwrap();
        for v in 0..c.num_vertices() {
            let p = &c.coords()[v];
            let on_axis = (p[0] - 0.5).abs() < 1e-12 || (p[1] - 0.5).abs() < 1e-12;
            let on_diag = ((p[0] - 0.5).abs() - (p[1] - 0.5).abs()).abs() < 1e-12;
            if on_axis || on_diag {
                assert!((g.dist[v] - e.dist[v]).abs() < 1e-12);
            }
            assert!(g.dist[v] >= e.dist[v] - 1e-12);
            assert!(g.dist[v] <= e.dist[v] * 1.09 + 1e-12);
        }
    }

    #[test]
    fn flat_cone_matches_euclidean() {
        let c = build_cone(2.0 * PI, 16, 64, 1.0).unwrap();
        let x0 = 1 + 3 * 64 + 5;
        let d = intrinsic_distances(&c, x0).unwrap();
        let p0 = &c.coords()[x0];
        for v in 0..c.num_vertices() {
            let p = &c.coords()[v];
            let e = ((p[0] - p0[0]).powi(2) + (p[1] - p0[1]).powi(2)).sqrt();
            assert!((d.dist[v] - e).abs() < 1e-12);
        }
        let g = geodesic_distances(&c, 0).unwrap();
        for v in 0..c.num_vertices() {
            assert!((g.dist[v] - c.cone_polar(v).unwrap().0).abs() < 1e-12);
        }
    }

    #[test]
    fn edgewise_triangle_inequality() {
        for c in [
            build_rectangle(9, 7, 1.0, 0.7).unwrap(),
            build_cone(1.5 * PI, 8, 24, 1.0).unwrap(),
        ] {
            for src in [0, c.num_vertices() / 2] {
                for d in [
                    geodesic_distances(&c, src).unwrap(),
                    intrinsic_distances(&c, src).unwrap(),
                ] {
                    assert_eq!(d.dist[src], 0.0);
                    for e in c.edges() {
                        assert!((d.dist[e.i] - d.dist[e.j]).abs() <= e.len * (1.0 + 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn cone_apex_ball_and_shell() {
        let a = PI;
        let c = build_cone(a, 64, 128, 1.0).unwrap();
        let d = intrinsic_distances(&c, 0).unwrap();
        let r = 0.5;
        let mu: f64 = ball(&d, r).iter().map(|&v| c.mass(v)).sum();
        assert!((mu - a * r * r / 2.0).abs() < 0.03, "{mu}");
        let s = shell_measure(&c, &d, 0.5, 1.0 / 32.0).unwrap();
        assert!((s.value - a * 0.5).abs() < 0.12, "{}", s.value);
    }

    #[test]
    fn disc_shell_and_coarea_consistency() {
        let c = build_rectangle(257, 257, 1.0, 1.0).unwrap();
        let center = 128 * 257 + 128;
        let d = intrinsic_distances(&c, center).unwrap();
        let h = 1.0 / 256.0;
        let s = shell_measure(&c, &d, 0.25, 8.0 * h).unwrap();
        assert!((s.value - 2.0 * PI * (0.25 + 4.0 * h)).abs() < 0.1);
        // coarea: integral of shell measure over [0, R] reproduces mu(B_R)
        let big_r = 0.45;
        let dr = h;
        let rs: Vec<f64> = (0..=((big_r / dr) as usize))
            .map(|k| k as f64 * dr)
            .collect();
        let vals: Vec<f64> = rs
            .iter()
            .map(|&r| shell_measure(&c, &d, r, dr).unwrap().value)
            .collect();
        let integral = trapezoid(&rs, &vals);
        let mu: f64 = ball(&d, big_r).iter().map(|&v| c.mass(v)).sum();
        assert!((integral - mu).abs() <= 0.02 * mu, "{integral} vs {mu}");
    }

    #[test]
    fn zero_radius_ball_is_source() {
        let c = build_rectangle(5, 5, 1.0, 1.0).unwrap();
        let d = intrinsic_distances(&c, 12).unwrap();
        assert_eq!(ball(&d, 0.0), Vec::<usize>::new());
        assert_eq!(closed_ball(&d, 0.0), vec![12]);
        assert_eq!(ball(&d, 1e-9), vec![12]);
        let s = shell_measure(&c, &d, 5.0, 0.1).unwrap();
        assert!(s.empty && s.value == 0.0);
        assert!(shell_measure(&c, &d, 0.1, 0.0).is_err());
    }
}
