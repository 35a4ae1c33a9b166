//! Quantitative diagnostics of a computed minimizer around free-boundary
//! points: Weiss density, growth, densities, perimeter, Euler-Lagrange
//! densities, a flat mean-value identity, homogeneity on cones and blow-ups.

mod blowup;
mod report;

pub use blowup::{blowup_rescale, rescale_defect};
pub use report::{
    density_csv, diagnose, el_csv, growth_csv, weiss_csv, DiagnoseOptions, DiagnosticsReport,
};

use crate::error::{Error, Result};
use crate::field::{QField, VectorField};
use crate::geometry::{closed_ball, intrinsic_distances, Chart, DistanceField, MetricComplex};
use crate::harmonic::{laplacian_measure, DEFAULT_CG_TOL};
use crate::numeric::{csum, ls_slope, trapezoid};
use serde::{Deserialize, Serialize};

/// Interior zero-set vertices with a positive neighbor.
pub fn free_boundary_points(complex: &MetricComplex, u: &VectorField, tau: f64) -> Vec<usize> {
    (0..complex.num_vertices())
        .filter(|&v| !complex.is_boundary(v) && u.norm(v) <= tau)
        .filter(|&v| complex.neighbors(v).iter().any(|&(n, _)| u.norm(n) > tau))
        .collect()
}

/// Distance from the source to the nearest boundary vertex (`+inf` on
/// closed complexes).
pub fn boundary_distance(complex: &MetricComplex, d: &DistanceField) -> f64 {
    complex
        .boundary_vertices()
        .iter()
        .map(|&v| d.dist[v])
        .fold(f64::INFINITY, f64::min)
}

/// Default shell width `max(2h, r/16)`.
pub fn default_shell_width(h: f64, r: f64) -> f64 {
    (2.0 * h).max(r / 16.0)
}

/// `count` radii spaced geometrically between `r_min` and `r_max`.
pub fn log_radii(r_min: f64, r_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(r_min > 0.0 && r_max > r_min) || count < 2 {
        return Err(Error::param(format!(
            "bad radius grid [{r_min}, {r_max}] x {count}"
        )));
    }
    let ratio = (r_max / r_min).ln() / (count - 1) as f64;
    Ok((0..count)
        .map(|k| r_min * (ratio * k as f64).exp())
        .collect())
}

/// An edge belongs to `B_r` when its midpoint distance is below `r`.
fn edge_in_ball(d: &DistanceField, i: usize, j: usize, r: f64) -> bool {
    0.5 * (d.dist[i] + d.dist[j]) < r
}

/// Hat kernel of half-width `half` with unit integral.
fn hat(t: f64, half: f64) -> f64 {
    (1.0 - t.abs() / half).max(0.0) / half
}

/// `int_{t}^{inf} hat`, the averaged indicator of `d < r'` at `t = d - r`.
fn ball_weight(t: f64, half: f64) -> f64 {
    let s = (t / half).clamp(-1.0, 1.0);
    if s <= 0.0 {
        1.0 - 0.5 * (1.0 + s).powi(2)
    } else {
        0.5 * (1.0 - s).powi(2)
    }
}

fn check_center(complex: &MetricComplex, u: &VectorField, x0: usize) -> Result<()> {
    if x0 >= complex.num_vertices() {
        return Err(Error::param(format!("center {x0} out of range")));
    }
    if u.num_vertices() != complex.num_vertices() {
        return Err(Error::ShapeMismatch(
            "field does not live on this complex".into(),
        ));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn weiss_at(
    complex: &MetricComplex,
    u: &VectorField,
    q: &QField,
    d: &DistanceField,
    r: f64,
    dr: f64,
    n: f64,
    tau: f64,
) -> Result<f64> {
    if !(r > 0.0 && dr > 0.0 && dr <= 2.0 * r) {
        return Err(Error::param(format!(
            "need r > 0 and 0 < dr <= 2r, got r={r}, dr={dr}"
        )));
    }
    let reach = r + 0.5 * dr;
    let bd = boundary_distance(complex, d);
    if reach > bd * (1.0 + 1e-12) {
        return Err(Error::pre(format!(
            "shell at r={r} (dr={dr}) leaves the domain (boundary at {bd})"
        )));
    }
    let half = 0.5 * dr;
    let dir = csum(complex.edges().iter().map(|e| {
        let d2: f64 = (0..u.m())
            .map(|i| (u.get(e.i, i) - u.get(e.j, i)).powi(2))
            .sum();
        e.w * d2 * ball_weight(0.5 * (d.dist[e.i] + d.dist[e.j]) - r, half)
    }));
    let bulk = csum(
        (0..complex.num_vertices())
            .filter(|&v| u.norm(v) > tau)
            .map(|v| complex.mass(v) * q.at(v) * ball_weight(d.dist[v] - r, half)),
    );
    let shell: Vec<(usize, f64)> = (0..complex.num_vertices())
        .map(|v| (v, hat(d.dist[v] - r, half)))
        .filter(|&(_, k)| k > 0.0)
        .collect();
    if shell.is_empty() {
        return Err(Error::EmptySet(format!("empty shell at r={r}, dr={dr}")));
    }
    let shell_mass = csum(shell.iter().map(|&(v, k)| k * complex.mass(v)));
    let mean_sq = csum(
        shell
            .iter()
            .map(|&(v, k)| k * complex.mass(v) * u.norm(v).powi(2)),
    ) / shell_mass;
    let volume = csum(
        (0..complex.num_vertices()).map(|v| complex.mass(v) * ball_weight(d.dist[v] - r, half)),
    );
    let perimeter = complex.intrinsic_dim() as f64 * volume / r;
    let trace = perimeter * mean_sq;
    Ok(r.powf(-n) * (dir + bulk) - r.powf(-n - 1.0) * trace)
}

/// Weiss density `r^-N (D(B_r) + sum_{B_r} m Q mask) - r^-N-1 int_{dB_r} |u|^2`.
///
/// Ball integrals are averaged over radii `r'` with a hat kernel supported on
/// `[r - dr/2, r + dr/2]`, so they vary continuously with `r`. The sphere
/// integral is `|dB_r|` times the kernel-weighted mean of `|u|^2` on that
/// shell, with `|dB_r| = d |B_r| / r` (`d` the intrinsic dimension; exact for
/// balls about a cone apex). Raw shell sums pick up a varying number of mesh
/// rings and oscillate with `r`.
#[allow(clippy::too_many_arguments)]
pub fn weiss_density(
    complex: &MetricComplex,
    u: &VectorField,
    q: &QField,
    x0: usize,
    r: f64,
    dr: f64,
    n: f64,
    tau: f64,
) -> Result<f64> {
    check_center(complex, u, x0)?;
    let d = intrinsic_distances(complex, x0)?;
    weiss_at(complex, u, q, &d, r, dr, n, tau)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeissProfile {
    pub center: usize,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Shell width used at each radius.
    pub dr: Vec<f64>,
    pub exponent: f64,
    /// `max_j max(0, W(r_j) - W(r_{j+1}))`.
    pub monotonicity_defect: f64,
    /// Set at `j` when `W(r_j) > W(r_{j+1})`.
    pub decreasing: Vec<bool>,
}

impl WeissProfile {
    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Weiss density over an increasing radius grid; `dr = None` uses
/// [`default_shell_width`] at each radius.
#[allow(clippy::too_many_arguments)]
pub fn weiss_profile(
    complex: &MetricComplex,
    u: &VectorField,
    q: &QField,
    x0: usize,
    radii: &[f64],
    dr: Option<f64>,
    n: f64,
    tau: f64,
) -> Result<WeissProfile> {
    check_center(complex, u, x0)?;
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(
            "radius grid must be non-empty and strictly increasing",
        ));
    }
    let d = intrinsic_distances(complex, x0)?;
    let h = complex.mesh_size();
    let drs: Vec<f64> = radii
        .iter()
        .map(|&r| dr.unwrap_or_else(|| default_shell_width(h, r)))
        .collect();
    let values = radii
        .iter()
        .zip(&drs)
        .map(|(&r, &w)| weiss_at(complex, u, q, &d, r, w, n, tau))
        .collect::<Result<Vec<f64>>>()?;
    let mut decreasing = vec![false; values.len()];
    let mut defect: f64 = 0.0;
    for j in 0..values.len().saturating_sub(1) {
        let drop = values[j] - values[j + 1];
        decreasing[j] = drop > 0.0;
        defect = defect.max(drop);
    }
    Ok(WeissProfile {
        center: x0,
        radii: radii.to_vec(),
        values,
        dr: drs,
        exponent: n,
        monotonicity_defect: defect,
        decreasing,
    })
}

/// Radii kept after trimming those beyond the boundary distance.
fn trim(radii: &[f64], limit: f64) -> (Vec<f64>, usize) {
    let kept: Vec<f64> = radii
        .iter()
        .copied()
        .filter(|&r| r <= limit * (1.0 + 1e-12))
        .collect();
    let trimmed = radii.len() - kept.len();
    if trimmed > 0 {
        log::warn!("{trimmed} radii beyond the boundary distance {limit} were trimmed");
    }
    (kept, trimmed)
}

fn check_fb(complex: &MetricComplex, u: &VectorField, x0: usize, tau: f64) -> Result<()> {
    let inside = u.norm(x0) > tau;
    if !complex
        .neighbors(x0)
        .iter()
        .any(|&(n, _)| (u.norm(n) > tau) != inside)
    {
        return Err(Error::pre(format!(
            "vertex {x0} is not on the free boundary"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthProfile {
    pub center: usize,
    /// Local `Q(x0)`.
    pub q_local: f64,
    pub radii: Vec<f64>,
    /// `sup_{B_r} |u|` over closed balls.
    pub sup: Vec<f64>,
    /// `sup / (sqrt(Q) r)`.
    pub ratio: Vec<f64>,
    /// Least-squares slope of `log sup` against `log r`.
    pub slope: Option<f64>,
    /// `max` of the ratio (upper growth constant).
    pub c_upper: f64,
    /// `min` of the ratio (nondegeneracy constant).
    pub c_lower: f64,
    pub trimmed: usize,
}

pub fn growth_profile(
    complex: &MetricComplex,
    u: &VectorField,
    q: &QField,
    x0: usize,
    radii: &[f64],
    tau: f64,
) -> Result<GrowthProfile> {
    check_center(complex, u, x0)?;
    check_fb(complex, u, x0, tau)?;
    let d = intrinsic_distances(complex, x0)?;
    let (radii, trimmed) = trim(radii, boundary_distance(complex, &d));
    if radii.is_empty() {
        return Err(Error::EmptySet(
            "every radius exceeds the boundary distance".into(),
        ));
    }
    let q_local = q.at(x0);
    let sup: Vec<f64> = radii
        .iter()
        .map(|&r| {
            closed_ball(&d, r)
                .iter()
                .map(|&v| u.norm(v))
                .fold(0.0, f64::max)
        })
        .collect();
    let ratio: Vec<f64> = sup
        .iter()
        .zip(&radii)
        .map(|(s, r)| s / (q_local.sqrt() * r))
        .collect();
    let logs: Vec<(f64, f64)> = radii
        .iter()
        .zip(&sup)
        .filter(|(_, s)| **s > 0.0)
        .map(|(r, s)| (r.ln(), s.ln()))
        .collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = logs.into_iter().unzip();
    Ok(GrowthProfile {
        center: x0,
        q_local,
        slope: ls_slope(&lx, &ly),
        c_upper: ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        c_lower: ratio.iter().copied().fold(f64::INFINITY, f64::min),
        radii,
        sup,
        ratio,
        trimmed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub center: usize,
    pub radii: Vec<f64>,
    /// `mu(B_r and {|u| > tau}) / mu(B_r)` over closed balls.
    pub pos: Vec<f64>,
    pub zero: Vec<f64>,
    pub trimmed: usize,
}

pub fn density_profile(
    complex: &MetricComplex,
    u: &VectorField,
    x0: usize,
    radii: &[f64],
    tau: f64,
) -> Result<DensityProfile> {
    check_center(complex, u, x0)?;
    check_fb(complex, u, x0, tau)?;
    let d = intrinsic_distances(complex, x0)?;
    let (radii, trimmed) = trim(radii, boundary_distance(complex, &d));
    if radii.is_empty() {
        return Err(Error::EmptySet(
            "every radius exceeds the boundary distance".into(),
        ));
    }
    let mut pos = Vec::with_capacity(radii.len());
    let mut zero = Vec::with_capacity(radii.len());
    for &r in &radii {
        let b = closed_ball(&d, r);
        let total = csum(b.iter().map(|&v| complex.mass(v)));
        let p = csum(
            b.iter()
                .filter(|&&v| u.norm(v) > tau)
                .map(|&v| complex.mass(v)),
        );
        pos.push(p / total);
        zero.push((total - p) / total);
    }
    Ok(DensityProfile {
        center: x0,
        radii,
        pos,
        zero,
        trimmed,
    })
}

/// Total perimeter weight of the edges crossing the mask.
pub fn perimeter_estimate(complex: &MetricComplex, mask: &[bool]) -> f64 {
    csum(
        complex
            .edges()
            .iter()
            .filter(|e| mask[e.i] != mask[e.j])
            .map(|e| e.per),
    )
}

/// Crossing edges with both ends flagged in `within`.
pub fn perimeter_within(complex: &MetricComplex, mask: &[bool], within: &[bool]) -> f64 {
    csum(
        complex
            .edges()
            .iter()
            .filter(|e| mask[e.i] != mask[e.j] && within[e.i] && within[e.j])
            .map(|e| e.per),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElDensity {
    pub center: usize,
    pub r: f64,
    /// Laplacian mass of each component in `B_r` per unit of local perimeter.
    pub q: Vec<f64>,
    /// `|sum q_i^2 - Q(x0)| / Q(x0)`.
    pub defect: f64,
    pub perimeter: f64,
}

/// Euler-Lagrange densities on `B_r(x0)` (the field should be a minimizer).
pub fn el_density(
    complex: &MetricComplex,
    u: &VectorField,
    qf: &QField,
    x0: usize,
    r: f64,
    tau: f64,
) -> Result<ElDensity> {
    check_center(complex, u, x0)?;
    if !(r > 0.0) {
        return Err(Error::param(format!("radius {r} must be positive")));
    }
    let d = intrinsic_distances(complex, x0)?;
    let within: Vec<bool> = d.dist.iter().map(|&x| x < r).collect();
    let mask: Vec<bool> = (0..complex.num_vertices())
        .map(|v| u.norm(v) > tau)
        .collect();
    let perimeter = perimeter_within(complex, &mask, &within);
    if !(perimeter > 0.0) {
        return Err(Error::pre(format!(
            "B_{r}({x0}) does not meet the free boundary"
        )));
    }
    let lap = laplacian_measure(complex, u);
    let ball: Vec<usize> = (0..complex.num_vertices()).filter(|&v| within[v]).collect();
    let q: Vec<f64> = (0..u.m())
        .map(|i| lap.total(i, &ball) / perimeter)
        .collect();
    let q0 = qf.at(x0);
    let defect = (q.iter().map(|x| x * x).sum::<f64>() - q0).abs() / q0;
    Ok(ElDensity {
        center: x0,
        r,
        q,
        defect,
        perimeter,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanValueCheck {
    /// Mean of `u` over `B_R`, minus `u(x0)`.
    pub lhs: f64,
    /// `(1/2) int_0^R s^-1 mean_{B_s} <grad u, grad rho^2> ds`.
    pub rhs: f64,
    pub residual: f64,
}

/// Flat-space mean-value identity for a nonnegative subharmonic scalar
/// field, integrated by the trapezoid rule on `n_grid + 1` radii.
pub fn mean_value_check(
    complex: &MetricComplex,
    u: &[f64],
    x0: usize,
    big_r: f64,
    n_grid: usize,
) -> Result<MeanValueCheck> {
    let n = complex.num_vertices();
    if u.len() != n || x0 >= n {
        return Err(Error::ShapeMismatch("field length or center".into()));
    }
    if !matches!(complex.chart(), Chart::Euclidean)
        && !matches!(complex.chart(), Chart::Cone { angle, .. } if (*angle - std::f64::consts::TAU).abs() < 1e-12)
    {
        log::warn!("mean-value identity is only exact on flat complexes");
    }
    if !(big_r > 0.0) || n_grid < 2 {
        return Err(Error::param(
            "mean-value check needs R > 0 and at least 2 intervals",
        ));
    }
    if let Some(v) = (0..n).find(|&v| u[v] < 0.0) {
        return Err(Error::pre(format!("field is negative at vertex {v}")));
    }
    let lap = complex.apply_laplacian(u);
    let eta = DEFAULT_CG_TOL;
    if let Some(v) = (0..n).find(|&v| !complex.is_boundary(v) && -lap[v] < -10.0 * eta) {
        return Err(Error::pre(format!(
            "field is not subharmonic at vertex {v}"
        )));
    }
    let d = intrinsic_distances(complex, x0)?;
    let rho2: Vec<f64> = d.dist.iter().map(|x| x * x).collect();
    let ball_mass = |s: f64| csum((0..n).filter(|&v| d.dist[v] < s).map(|v| complex.mass(v)));
    let mu_r = ball_mass(big_r);
    if !(mu_r > 0.0) {
        return Err(Error::EmptySet("empty ball".into()));
    }
    let lhs = csum(
        (0..n)
            .filter(|&v| d.dist[v] < big_r)
            .map(|v| complex.mass(v) * u[v]),
    ) / mu_r
        - u[x0];
    let grid: Vec<f64> = (0..=n_grid)
        .map(|k| big_r * k as f64 / n_grid as f64)
        .collect();
    let vals: Vec<f64> = grid
        .iter()
        .map(|&s| {
            let mu = ball_mass(s);
            if s == 0.0 || mu == 0.0 {
                return 0.0;
            }
            let pairing = csum(
                complex
                    .edges()
                    .iter()
                    .filter(|e| edge_in_ball(&d, e.i, e.j, s))
                    .map(|e| e.w * (u[e.i] - u[e.j]) * (rho2[e.i] - rho2[e.j])),
            );
            pairing / (mu * s)
        })
        .collect();
    let rhs = 0.5 * trapezoid(&grid, &vals);
    let residual = if lhs.abs() <= 1e-300 && rhs.abs() <= 1e-300 {
        0.0
    } else {
        (lhs - rhs).abs() / lhs.max(1e-30)
    };
    Ok(MeanValueCheck { lhs, rhs, residual })
}

/// Deviation of a field on a cone from the 1-homogeneous extension of its
/// trace on the unit ring: `max |u(r,t) - r u~(1,t)| / (r max(sup u~, tau))`.
pub fn homogeneity_defect(complex: &MetricComplex, u: &VectorField, tau: f64) -> Result<f64> {
    let Chart::Cone {
        rmax, nr, ntheta, ..
    } = *complex.chart()
    else {
        return Err(Error::pre("homogeneity defect needs a cone complex"));
    };
    if u.num_vertices() != complex.num_vertices() {
        return Err(Error::ShapeMismatch(
            "field does not live on this complex".into(),
        ));
    }
    let idx = |ring: usize, j: usize| 1 + (ring - 1) * ntheta + j;
    let ring_r = |ring: usize| rmax * ring as f64 / nr as f64;
    let mut worst: f64 = 0.0;
    for i in 0..u.m() {
        // trace on the unit ring by radial interpolation (or homogeneous
        // extension of the outer ring when the cone is shorter than 1)
        let unit: Vec<f64> = (0..ntheta)
            .map(|j| {
                if rmax <= 1.0 {
                    u.get(idx(nr, j), i) / rmax
                } else {
                    let t = nr as f64 / rmax;
                    let lo = (t.floor() as usize).max(1);
                    let hi = (lo + 1).min(nr);
                    let (a, b) = (u.get(idx(lo, j), i), u.get(idx(hi, j), i));
                    if hi == lo {
                        a
                    } else {
                        let s = (1.0 - ring_r(lo)) / (ring_r(hi) - ring_r(lo));
                        a + s * (b - a)
                    }
                }
            })
            .collect();
        let scale = unit.iter().copied().fold(0.0, f64::max).max(tau);
        for ring in 1..=nr {
            let r = ring_r(ring);
            for (j, &uj) in unit.iter().enumerate() {
                let dev = (u.get(idx(ring, j), i) - r * uj).abs() / (r * scale);
                worst = worst.max(dev);
            }
        }
    }
    Ok(worst)
}
