use super::boundary_distance;
use crate::error::{Error, Result};
use crate::field::{BoundaryData, PositivityMask, QField, VectorField};
use crate::geometry::{build_cone, cone_distance, intrinsic_distances, Chart, MetricComplex};
use crate::minimize::{solve_relaxed, solve_setmove, SolveConfig};
use std::f64::consts::TAU;

/// Distances from the point at polar position `(r, t)` around `x0` to every
/// vertex, on flat charts or around a cone apex.
fn distances_to_polar(coarse: &MetricComplex, x0: usize, r: f64, t: f64) -> Result<Vec<f64>> {
    match coarse.chart() {
        Chart::Euclidean if coarse.coords()[x0].len() == 2 => {
            let c = &coarse.coords()[x0];
            let p = [c[0] + r * t.cos(), c[1] + r * t.sin()];
            Ok(coarse
                .coords()
                .iter()
                .map(|q| ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt())
                .collect())
        }
        Chart::Cone { angle, .. } if x0 == 0 => Ok((0..coarse.num_vertices())
            .map(|v| {
                let (rv, tv) = coarse.cone_polar(v).unwrap();
                cone_distance(*angle, r, t, rv, tv)
            })
            .collect()),
        _ => Err(Error::pre(
            "blow-ups are supported at points of flat planar charts and at cone apices",
        )),
    }
}

/// Blow-up of `u` at `x0` and scale `r`: a cone mesh of the unit ball
/// (`nr` rings, `ntheta` rays; flat when `x0` is not an apex) with rim data
/// `u(x0 + r y) / r` averaged over coarse vertices within one coarse cell,
/// minimized again with `Q = Q(x0)`.
#[allow(clippy::too_many_arguments)]
pub fn blowup_rescale(
    coarse: &MetricComplex,
    u: &VectorField,
    q: &QField,
    x0: usize,
    r: f64,
    nr: usize,
    ntheta: usize,
    config: &SolveConfig,
) -> Result<(MetricComplex, VectorField)> {
    if !(r > 0.0) {
        return Err(Error::param(format!("blow-up scale {r} must be positive")));
    }
    if u.num_vertices() != coarse.num_vertices() || x0 >= coarse.num_vertices() {
        return Err(Error::ShapeMismatch(
            "field or center does not fit the complex".into(),
        ));
    }
    let angle = match coarse.chart() {
        Chart::Cone { angle, .. } if x0 == 0 => *angle,
        _ => TAU,
    };
    let d = intrinsic_distances(coarse, x0)?;
    let bd = boundary_distance(coarse, &d);
    if 2.0 * r > bd * (1.0 + 1e-12) {
        return Err(Error::pre(format!(
            "B_2r({x0}) with r={r} leaves the domain (boundary at {bd})"
        )));
    }
    let fine = build_cone(angle, nr, ntheta, 1.0)?;
    let hc = coarse.mesh_size();
    let m = u.m();
    let mut rim = vec![vec![0.0; m]; fine.num_vertices()];
    for j in 0..ntheta {
        let t = j as f64 * angle / ntheta as f64;
        let dist = distances_to_polar(coarse, x0, r, t)?;
        let near: Vec<usize> = (0..coarse.num_vertices())
            .filter(|&v| dist[v] <= hc)
            .collect();
        let near = if near.is_empty() {
            vec![(0..coarse.num_vertices())
                .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
                .unwrap()]
        } else {
            near
        };
        let mass: f64 = near.iter().map(|&v| coarse.mass(v)).sum();
        let v_rim = 1 + (nr - 1) * ntheta + j;
        for i in 0..m {
            let avg: f64 = near
                .iter()
                .map(|&v| coarse.mass(v) * u.get(v, i))
                .sum::<f64>()
                / mass;
            rim[v_rim][i] = avg / r;
        }
    }
    let g = BoundaryData::from_fn(&fine, m, |v| rim[v].clone())?;
    let qf = QField::constant(fine.num_vertices(), q.at(x0))?;
    let relaxed = solve_relaxed(&fine, &qf, &g, config)?;
    let init = PositivityMask::of(&relaxed.field, config.tau);
    let refined = solve_setmove(&fine, &qf, &g, &init, config)?;
    Ok((fine, refined.field))
}

/// `max_y |v(y) - u(x0 + r y) / r|` over the vertices of the blow-up mesh,
/// reading `u` at the nearest coarse vertex.
pub fn rescale_defect(
    coarse: &MetricComplex,
    u: &VectorField,
    x0: usize,
    r: f64,
    fine: &MetricComplex,
    v: &VectorField,
) -> Result<f64> {
    if u.m() != v.m() || v.num_vertices() != fine.num_vertices() {
        return Err(Error::ShapeMismatch("blow-up field does not match".into()));
    }
    let lookup = |p: usize| -> Result<usize> {
        let (rho, t) = fine
            .cone_polar(p)
            .ok_or_else(|| Error::pre("blow-up mesh must be a cone"))?;
        match coarse.chart() {
            Chart::Cone {
                angle,
                rmax,
                nr,
                ntheta,
            } if x0 == 0 => {
                let ring = ((r * rho) * *nr as f64 / rmax).round() as usize;
                if ring == 0 {
                    return Ok(0);
                }
                let j = (t / angle * *ntheta as f64).round() as usize % ntheta;
                Ok(1 + (ring.min(*nr) - 1) * ntheta + j)
            }
            Chart::Euclidean if coarse.coords()[x0].len() == 2 => {
                let c = &coarse.coords()[x0];
                let point = [c[0] + r * rho * t.cos(), c[1] + r * rho * t.sin()];
                Ok(coarse.nearest_vertex(&point).unwrap_or(x0))
            }
            _ => Err(Error::pre(
                "blow-ups are supported at points of flat planar charts and at cone apices",
            )),
        }
    };
    let mut worst: f64 = 0.0;
    for p in 0..fine.num_vertices() {
        let c = lookup(p)?;
        for i in 0..u.m() {
            worst = worst.max((v.get(p, i) - u.get(c, i) / r).abs());
        }
    }
    Ok(worst)
}
