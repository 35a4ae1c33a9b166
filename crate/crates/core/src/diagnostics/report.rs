use super::{
    density_profile, el_density, free_boundary_points, growth_profile, homogeneity_defect,
    log_radii, mean_value_check, perimeter_estimate, weiss_profile, DensityProfile, ElDensity,
    GrowthProfile, WeissProfile,
};
use crate::error::{Error, Result};
use crate::field::{fmt_f64, QField, VectorField};
use crate::geometry::{Chart, MetricComplex};
use crate::DEFAULT_TAU;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseOptions {
    /// Smallest radius in units of the mesh size.
    pub r_min_h: f64,
    pub r_max: f64,
    pub n_radii: usize,
    /// Euler-Lagrange ball radius in units of the mesh size.
    pub el_radius_h: f64,
    /// Fixed shell width; `None` uses `max(2h, r/16)`.
    pub dr: Option<f64>,
    /// Radial grid of the mean-value check (flat charts only).
    pub mean_value_grid: usize,
    pub tau: f64,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            r_min_h: 4.0,
            r_max: 0.25,
            n_radii: 16,
            el_radius_h: 8.0,
            dr: None,
            mean_value_grid: 64,
            tau: DEFAULT_TAU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub center: usize,
    pub options: DiagnoseOptions,
    pub growth: GrowthProfile,
    pub density: DensityProfile,
    /// Perimeter of the whole positivity set.
    pub perimeter: f64,
    pub el: Option<ElDensity>,
    /// Weiss profile over the growth radii that fit the domain.
    pub weiss: Option<WeissProfile>,
    pub mean_value_residual: Option<f64>,
    pub homogeneity_defect: Option<f64>,
}

/// Full diagnostic report at the free-boundary point `x0` (the first free
/// boundary point when `None`).
pub fn diagnose(
    complex: &MetricComplex,
    u: &VectorField,
    q: &QField,
    x0: Option<usize>,
    opts: &DiagnoseOptions,
) -> Result<DiagnosticsReport> {
    let tau = opts.tau;
    let x0 = match x0 {
        Some(x) => x,
        None => *free_boundary_points(complex, u, tau)
            .first()
            .ok_or_else(|| Error::pre("field has no free boundary"))?,
    };
    let h = complex.mesh_size();
    let radii = log_radii(opts.r_min_h * h, opts.r_max, opts.n_radii)?;
    let growth = growth_profile(complex, u, q, x0, &radii, tau)?;
    let density = density_profile(complex, u, x0, &radii, tau)?;
    let mask: Vec<bool> = (0..complex.num_vertices())
        .map(|v| u.norm(v) > tau)
        .collect();
    let perimeter = perimeter_estimate(complex, &mask);
    let el = el_density(complex, u, q, x0, opts.el_radius_h * h, tau)
        .map_err(|e| log::warn!("Euler-Lagrange density skipped: {e}"))
        .ok();
    let n = complex.intrinsic_dim() as f64;
    let weiss = weiss_profile(complex, u, q, x0, &growth.radii, opts.dr, n, tau)
        .map_err(|e| log::warn!("Weiss profile skipped: {e}"))
        .ok();
    let mean_value_residual = if matches!(complex.chart(), Chart::Euclidean) && u.m() == 1 {
        let r = *growth.radii.last().unwrap();
        mean_value_check(complex, &u.component(0), x0, r, opts.mean_value_grid)
            .map(|c| c.residual)
            .map_err(|e| log::warn!("mean-value check skipped: {e}"))
            .ok()
    } else {
        None
    };
    let homogeneity_defect = match complex.chart() {
        Chart::Cone { .. } => Some(homogeneity_defect(complex, u, tau)?),
        _ => None,
    };
    Ok(DiagnosticsReport {
        center: x0,
        options: opts.clone(),
        growth,
        density,
        perimeter,
        el,
        weiss,
        mean_value_residual,
        homogeneity_defect,
    })
}

pub fn weiss_csv(p: &WeissProfile) -> String {
    let mut s = String::from("r,W,defect_flag\n");
    for (j, (r, w)) in p.radii.iter().zip(&p.values).enumerate() {
        let _ = writeln!(
            s,
            "{},{},{}",
            fmt_f64(*r),
            fmt_f64(*w),
            u8::from(p.decreasing[j])
        );
    }
    s
}

pub fn growth_csv(p: &GrowthProfile) -> String {
    let mut s = String::from("r,sup_ratio\n");
    for (r, x) in p.radii.iter().zip(&p.ratio) {
        let _ = writeln!(s, "{},{}", fmt_f64(*r), fmt_f64(*x));
    }
    s
}

pub fn density_csv(p: &DensityProfile) -> String {
    let mut s = String::from("r,pos,zero\n");
    for ((r, a), b) in p.radii.iter().zip(&p.pos).zip(&p.zero) {
        let _ = writeln!(s, "{},{},{}", fmt_f64(*r), fmt_f64(*a), fmt_f64(*b));
    }
    s
}

pub fn el_csv(p: &ElDensity) -> String {
    let mut s = String::from("component,q\n");
    for (i, q) in p.q.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i + 1, fmt_f64(*q));
    }
    s
}
