//! Builders for the standard complexes.

use super::{Chart, ComplexParts, Edge, MetricComplex, Shortcut};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// A triangle with its intrinsic (developed) planar vertex positions.
struct PlanarTriangle {
    v: [usize; 3],
    p: [[f64; 2]; 3],
}

struct Assembled {
    masses: Vec<f64>,
    edges: Vec<Edge>,
    shortcuts: Vec<Shortcut>,
    triangles: Vec<[usize; 3]>,
}

/// Cotangent weights, lumped barycentric masses and dual edge lengths.
/// Mesh edges whose cotangent weight vanishes become distance short cuts.
fn assemble_triangles(n: usize, tris: &[PlanarTriangle]) -> Result<Assembled> {
    let mut masses = vec![0.0; n];
    let mut acc: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for t in tris {
        let [a, b, c] = t.p;
        let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let area = 0.5 * cross.abs();
        if !(area > 0.0) {
            return Err(Error::param("degenerate triangle"));
        }
        for k in 0..3 {
            masses[t.v[k]] += area / 3.0;
            let (k1, k2) = ((k + 1) % 3, (k + 2) % 3);
            let e1 = [t.p[k1][0] - t.p[k][0], t.p[k1][1] - t.p[k][1]];
            let e2 = [t.p[k2][0] - t.p[k][0], t.p[k2][1] - t.p[k][1]];
            let cot = (e1[0] * e2[0] + e1[1] * e2[1]) / (2.0 * area);
            let (i, j) = (t.v[k1].min(t.v[k2]), t.v[k1].max(t.v[k2]));
            let len =
                ((t.p[k1][0] - t.p[k2][0]).powi(2) + (t.p[k1][1] - t.p[k2][1]).powi(2)).sqrt();
            let entry = acc.entry((i, j)).or_insert((0.0, len));
            entry.0 += 0.5 * cot;
        }
    }
    let wmax = acc.values().map(|(w, _)| w.abs()).fold(0.0, f64::max);
    let mut edges = Vec::new();
    let mut shortcuts = Vec::new();
    for ((i, j), (w, len)) in acc {
        if w.abs() <= 1e-12 * wmax {
            shortcuts.push(Shortcut { i, j, len });
        } else if w > 0.0 {
            edges.push(Edge {
                i,
                j,
                w,
                len,
                per: w * len,
            });
        } else {
            return Err(Error::param(format!(
                "negative cotangent weight {w:.3e} on edge ({i}, {j}); mesh is not Delaunay"
            )));
        }
    }
    Ok(Assembled {
        masses,
        edges,
        shortcuts,
        triangles: tris.iter().map(|t| t.v).collect(),
    })
}

/// Uniform chain on `[0, length]`.
pub fn build_interval(n: usize, length: f64) -> Result<MetricComplex> {
    build_interval_between(n, 0.0, length)
}

/// Uniform chain on `[start, end]`: `h = (end - start) / (n - 1)`, `w = 1/h`,
/// `len = h`, masses `h` (halved at the endpoints), perimeter weight 1.
pub fn build_interval_between(n: usize, start: f64, end: f64) -> Result<MetricComplex> {
    if n < 3 {
        return Err(Error::param(format!(
            "interval needs at least 3 vertices, got {n}"
        )));
    }
    let length = end - start;
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::param(format!(
            "interval length {length} must be positive"
        )));
    }
    let h = length / (n - 1) as f64;
    let mut masses = vec![h; n];
    masses[0] = 0.5 * h;
    masses[n - 1] = 0.5 * h;
    let coords = (0..n)
        .map(|v| vec![start + length * v as f64 / (n - 1) as f64])
        .collect();
    let edges = (0..n - 1)
        .map(|v| Edge {
            i: v,
            j: v + 1,
            w: 1.0 / h,
            len: h,
            per: 1.0,
        })
        .collect();
    let mut boundary = vec![false; n];
    boundary[0] = true;
    boundary[n - 1] = true;
    MetricComplex::from_parts(ComplexParts {
        masses,
        coords,
        edges,
        shortcuts: vec![],
        boundary,
        triangles: vec![],
        intrinsic_dim: 1,
        curvature_bound: 0.0,
        description: format!("interval(n={n}, start={start}, end={end})"),
        chart: Chart::Euclidean,
    })
}

/// Structured right-triangle mesh of `[0, lx] x [0, ly]`; vertex `(i, j)` has
/// index `j * nx + i`.
pub fn build_rectangle(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<MetricComplex> {
    if nx < 3 || ny < 3 {
        return Err(Error::param(format!(
            "rectangle needs nx, ny >= 3, got {nx} x {ny}"
        )));
    }
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
        return Err(Error::param(format!(
            "rectangle dimensions {lx} x {ly} must be positive"
        )));
    }
    let idx = |i: usize, j: usize| j * nx + i;
    let x = |i: usize| lx * i as f64 / (nx - 1) as f64;
    let y = |j: usize| ly * j as f64 / (ny - 1) as f64;
    let n = nx * ny;
    let mut tris = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    let mut extra = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            let (pa, pb, pc, pd) = (
                [x(i), y(j)],
                [x(i + 1), y(j)],
                [x(i), y(j + 1)],
                [x(i + 1), y(j + 1)],
            );
            tris.push(PlanarTriangle {
                v: [a, b, d],
                p: [pa, pb, pd],
            });
            tris.push(PlanarTriangle {
                v: [a, d, c],
                p: [pa, pd, pc],
            });
            let len = ((pb[0] - pc[0]).powi(2) + (pb[1] - pc[1]).powi(2)).sqrt();
            extra.push(Shortcut {
                i: b.min(c),
                j: b.max(c),
                len,
            });
        }
    }
    let mut asm = assemble_triangles(n, &tris)?;
    asm.shortcuts.extend(extra);
    let coords = (0..n).map(|v| vec![x(v % nx), y(v / nx)]).collect();
    let boundary = (0..n)
        .map(|v| {
            let (i, j) = (v % nx, v / nx);
            i == 0 || j == 0 || i == nx - 1 || j == ny - 1
        })
        .collect();
    MetricComplex::from_parts(ComplexParts {
        masses: asm.masses,
        coords,
        edges: asm.edges,
        shortcuts: asm.shortcuts,
        boundary,
        triangles: asm.triangles,
        intrinsic_dim: 2,
        curvature_bound: 0.0,
        description: format!("rectangle(nx={nx}, ny={ny}, lx={lx}, ly={ly})"),
        chart: Chart::Euclidean,
    })
}

/// Flat cone over a circle of length `angle`, triangulated in polar rings.
/// The apex is vertex 0; the outer rim is the boundary.
pub fn build_cone(angle: f64, nr: usize, ntheta: usize, rmax: f64) -> Result<MetricComplex> {
    if !(angle > 0.0 && angle <= 2.0 * PI) {
        return Err(Error::param(format!("cone angle {angle} outside (0, 2pi]")));
    }
    if nr < 2 || ntheta < 3 {
        return Err(Error::param(format!(
            "cone needs nr >= 2 and ntheta >= 3, got {nr}, {ntheta}"
        )));
    }
    if !(rmax > 0.0 && rmax.is_finite()) {
        return Err(Error::param(format!("cone radius {rmax} must be positive")));
    }
    let n = 1 + nr * ntheta;
    let idx = |ring: usize, j: usize| 1 + (ring - 1) * ntheta + (j % ntheta);
    let radius = |ring: usize| rmax * ring as f64 / nr as f64;
    let delta = angle / ntheta as f64;
    let (cd, sd) = (delta.cos(), delta.sin());
    let mut tris = Vec::with_capacity(ntheta * (2 * nr - 1));
    let mut extra = Vec::new();
    for j in 0..ntheta {
        let r1 = radius(1);
        tris.push(PlanarTriangle {
            v: [0, idx(1, j), idx(1, j + 1)],
            p: [[0.0, 0.0], [r1, 0.0], [r1 * cd, r1 * sd]],
        });
    }
    for ring in 1..nr {
        let (ri, ro) = (radius(ring), radius(ring + 1));
        for j in 0..ntheta {
            let (in0, in1, out0, out1) = (
                idx(ring, j),
                idx(ring, j + 1),
                idx(ring + 1, j),
                idx(ring + 1, j + 1),
            );
            let (pin0, pin1, pout0, pout1) =
                ([ri, 0.0], [ri * cd, ri * sd], [ro, 0.0], [ro * cd, ro * sd]);
            tris.push(PlanarTriangle {
                v: [in0, out0, out1],
                p: [pin0, pout0, pout1],
            });
            tris.push(PlanarTriangle {
                v: [in0, out1, in1],
                p: [pin0, pout1, pin1],
            });
            let len = ((pout0[0] - pin1[0]).powi(2) + (pout0[1] - pin1[1]).powi(2)).sqrt();
            extra.push(Shortcut {
                i: out0.min(in1),
                j: out0.max(in1),
                len,
            });
        }
    }
    let mut asm = assemble_triangles(n, &tris)?;
    asm.shortcuts.extend(extra);
    let mut coords = vec![vec![0.0, 0.0]; n];
    let mut boundary = vec![false; n];
    for ring in 1..=nr {
        for j in 0..ntheta {
            let th = j as f64 * delta;
            let r = radius(ring);
            coords[idx(ring, j)] = vec![r * th.cos(), r * th.sin()];
            boundary[idx(ring, j)] = ring == nr;
        }
    }
    MetricComplex::from_parts(ComplexParts {
        masses: asm.masses,
        coords,
        edges: asm.edges,
        shortcuts: asm.shortcuts,
        boundary,
        triangles: asm.triangles,
        intrinsic_dim: 2,
        curvature_bound: 0.0,
        description: format!("cone(angle={angle}, nr={nr}, ntheta={ntheta}, rmax={rmax})"),
        chart: Chart::Cone {
            angle,
            rmax,
            nr,
            ntheta,
        },
    })
}

/// Two equilateral triangles of side `side`, each refined into `n^2` small
/// equilateral triangles, glued along their boundaries. The result is a
/// closed surface with an empty boundary marker set.
pub fn build_doubled_triangle(side: f64, n: usize) -> Result<MetricComplex> {
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::param(format!(
            "triangle side {side} must be positive"
        )));
    }
    if n < 2 {
        return Err(Error::param(format!("refinement must be >= 2, got {n}")));
    }
    let h = side / n as f64;
    let pos = |i: usize, j: usize| {
        [
            h * (i as f64 + 0.5 * j as f64),
            h * j as f64 * 3f64.sqrt() / 2.0,
        ]
    };
    let on_rim = |i: usize, j: usize| i == 0 || j == 0 || i + j == n;

    // sheet A: every lattice point; sheet B: interior lattice points only
    let mut index_a = BTreeMap::new();
    let mut index_b = BTreeMap::new();
    let mut coords = Vec::new();
    for j in 0..=n {
        for i in 0..=n - j {
            index_a.insert((i, j), coords.len());
            let p = pos(i, j);
            coords.push(vec![p[0], p[1], 0.0]);
        }
    }
    for j in 0..=n {
        for i in 0..=n - j {
            if on_rim(i, j) {
                index_b.insert((i, j), index_a[&(i, j)]);
            } else {
                index_b.insert((i, j), coords.len());
                let p = pos(i, j);
                coords.push(vec![p[0], p[1], 1.0]);
            }
        }
    }
    let mut tris = Vec::with_capacity(2 * n * n);
    for index in [&index_a, &index_b] {
        for j in 0..n {
            for i in 0..n - j {
                tris.push(PlanarTriangle {
                    v: [index[&(i, j)], index[&(i + 1, j)], index[&(i, j + 1)]],
                    p: [pos(i, j), pos(i + 1, j), pos(i, j + 1)],
                });
                if i + j + 2 <= n {
                    tris.push(PlanarTriangle {
                        v: [
                            index[&(i + 1, j)],
                            index[&(i + 1, j + 1)],
                            index[&(i, j + 1)],
                        ],
                        p: [pos(i + 1, j), pos(i + 1, j + 1), pos(i, j + 1)],
                    });
                }
            }
        }
    }
    let nv = coords.len();
    let asm = assemble_triangles(nv, &tris)?;
    MetricComplex::from_parts(ComplexParts {
        masses: asm.masses,
        coords,
        edges: asm.edges,
        shortcuts: asm.shortcuts,
        boundary: vec![false; nv],
        triangles: asm.triangles,
        intrinsic_dim: 2,
        curvature_bound: 0.0,
        description: format!("doubled_triangle(side={side}, n={n})"),
        chart: Chart::Graph,
    })
}

/// Tensor product of a chain with an arbitrary fiber. Vertex `(t, y)` has
/// index `t * n_fiber + y`.
pub fn build_product(line: &MetricComplex, fiber: &MetricComplex) -> Result<MetricComplex> {
    let nl = line.num_vertices();
    let is_chain = line.intrinsic_dim() == 1
        && line.num_edges() == nl - 1
        && line
            .edges()
            .iter()
            .enumerate()
            .all(|(k, e)| e.i == k && e.j == k + 1)
        && line.coords().len() == nl;
    if !is_chain {
        return Err(Error::param(
            "product line factor must be a chain with coordinates",
        ));
    }
    let nf = fiber.num_vertices();
    let idx = |t: usize, y: usize| t * nf + y;
    let mut masses = Vec::with_capacity(nl * nf);
    let mut coords = Vec::with_capacity(nl * nf);
    let mut boundary = Vec::with_capacity(nl * nf);
    for t in 0..nl {
        for y in 0..nf {
            masses.push(line.mass(t) * fiber.mass(y));
            let mut c = vec![line.coords()[t][0]];
            if let Some(fc) = fiber.coord(y) {
                c.extend_from_slice(fc);
            }
            coords.push(c);
            boundary.push(line.is_boundary(t) || fiber.is_boundary(y));
        }
    }
    let mut edges = Vec::with_capacity(nl * fiber.num_edges() + (nl - 1) * nf);
    for le in line.edges() {
        for y in 0..nf {
            edges.push(Edge {
                i: idx(le.i, y),
                j: idx(le.j, y),
                w: le.w * fiber.mass(y),
                len: le.len,
                per: le.per * fiber.mass(y),
            });
        }
    }
    for t in 0..nl {
        for fe in fiber.edges() {
            edges.push(Edge {
                i: idx(t, fe.i),
                j: idx(t, fe.j),
                w: line.mass(t) * fe.w,
                len: fe.len,
                per: line.mass(t) * fe.per,
            });
        }
    }
    let mut shortcuts = Vec::new();
    for t in 0..nl {
        for s in fiber.shortcuts() {
            shortcuts.push(Shortcut {
                i: idx(t, s.i),
                j: idx(t, s.j),
                len: s.len,
            });
        }
    }
    MetricComplex::from_parts(ComplexParts {
        masses,
        coords,
        edges,
        shortcuts,
        boundary,
        triangles: vec![],
        intrinsic_dim: 1 + fiber.intrinsic_dim(),
        curvature_bound: fiber.curvature_bound().min(line.curvature_bound()),
        description: format!("product({} x {})", line.description(), fiber.description()),
        chart: Chart::Product {
            n_line: nl,
            n_fiber: nf,
            line_coords: line.coords().iter().map(|c| c[0]).collect(),
            fiber: Box::new(fiber.clone()),
        },
    })
}
