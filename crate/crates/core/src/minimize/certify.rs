//! Move-catalogue certificate: a field is accepted when no move of the
//! catalogue lowers its exact energy by more than `1e-8 |J|`.

use super::state::{evaluate_flips, flipped, free_boundary_band, solve_mask, FlipContext};
use super::{cert_tol, diameter, dyadic_radii, SolveConfig};
use crate::energy::{
    changed_vertices, competitor_truncate, cutoff_competitor, energy, energy_delta, psi_theta,
};
use crate::error::{Error, Result};
use crate::field::{field_dist_local, positivity_mask, sup_on, QField, VectorField};
use crate::geometry::{ball, intrinsic_distances, MetricComplex};
use crate::harmonic::{solve_dirichlet, DirichletProblem};
use serde::{Deserialize, Serialize};

/// Number of most negative flips for which the competitor is rebuilt to
/// record its distance.
const FLIP_DIST_RECORDS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveClass {
    /// `(u_i - delta phi)^+` with a tent `phi`.
    Truncation,
    /// `min(u, M psi_theta)` on a ball.
    Cutoff,
    /// Harmonic replacement on the whole positivity set or on a small ball.
    HarmonicReplacement,
    /// One interior vertex in or out of the positivity set.
    Flip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveRecord {
    pub class: MoveClass,
    /// Center vertex (flipped vertex for flips; none for the global replacement).
    pub center: Option<usize>,
    /// Radius, truncation depth or zero, depending on the class.
    pub size: f64,
    /// Cutoff ratio, or the truncated component for truncations.
    pub param: f64,
    pub delta: f64,
    pub field_dist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassVerdict {
    pub class: MoveClass,
    pub tested: usize,
    /// Smallest energy change in the class (`+inf` if nothing was tested).
    pub worst_delta: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizerCertificate {
    pub energy: f64,
    pub tol: f64,
    pub classes: Vec<ClassVerdict>,
    /// Smallest energy change over all tested moves.
    pub worst_margin: f64,
    pub worst_move: Option<MoveRecord>,
    /// Explicit competitors plus the most negative flips, with distances.
    pub records: Vec<MoveRecord>,
    pub valid: bool,
}

impl MinimizerCertificate {
    pub fn class(&self, class: MoveClass) -> Option<&ClassVerdict> {
        self.classes.iter().find(|c| c.class == class)
    }
}

#[allow(clippy::too_many_arguments)]
fn local_record(
    complex: &MetricComplex,
    u: &VectorField,
    v: &VectorField,
    q: &QField,
    tau: f64,
    class: MoveClass,
    center: usize,
    size: f64,
    param: f64,
) -> Option<MoveRecord> {
    let support = changed_vertices(u, v);
    if support.is_empty() {
        return None;
    }
    Some(MoveRecord {
        class,
        center: Some(center),
        size,
        param,
        delta: energy_delta(complex, u, v, q, tau, &support),
        field_dist: Some(field_dist_local(u, v, complex, &support)),
    })
}

/// Harmonic extension of `u` into the interior vertices of `inner`, per
/// component, snapped at `tau`.
fn ball_replacement(
    complex: &MetricComplex,
    u: &VectorField,
    inner: &[usize],
    config: &SolveConfig,
) -> Result<VectorField> {
    let n = complex.num_vertices();
    let mut fixed = vec![true; n];
    for &v in inner {
        fixed[v] = complex.is_boundary(v);
    }
    let mut comps = Vec::with_capacity(u.m());
    for i in 0..u.m() {
        let mut values = u.component(i);
        for &v in inner {
            if !fixed[v] {
                values[v] = 0.0;
            }
        }
        let p = DirichletProblem::new(complex, fixed.clone(), values)?
            .with_tolerance(config.cg_tol, 20 * inner.len() + 100);
        comps.push(
            solve_dirichlet(&p)?
                .into_iter()
                .map(|x| x.max(0.0))
                .collect::<Vec<f64>>(),
        );
    }
    let raw = VectorField::from_components(complex, &comps, u.boundary_data().clone())?;
    Ok(positivity_mask(&raw, config.tau)?.0)
}

/// Moves centered at one free-boundary vertex.
fn moves_at(
    complex: &MetricComplex,
    u: &VectorField,
    q: &QField,
    x0: usize,
    radii: &[f64],
    config: &SolveConfig,
) -> Result<Vec<MoveRecord>> {
    let h = complex.mesh_size();
    let tau = config.tau;
    let d = intrinsic_distances(complex, x0)?;
    let n_dim = complex.intrinsic_dim() as f64;
    let k_curv = complex.curvature_bound();
    let mut out = Vec::new();
    for &r in radii {
        let b = ball(&d, r);
        let big_m = sup_on(u, &b)?;
        if big_m <= tau {
            continue;
        }
        for theta in [0.25, 0.5] {
            let prof = psi_theta(&d, r, theta, n_dim.max(2.0), k_curv.min(0.0))?;
            let v = cutoff_competitor(complex, u, &prof, big_m)?;
            let v = positivity_mask(&v, tau)?.0;
            out.extend(local_record(
                complex,
                u,
                &v,
                q,
                tau,
                MoveClass::Cutoff,
                x0,
                r,
                theta,
            ));
        }
    }
    let phi: Vec<f64> = (0..complex.num_vertices())
        .map(|v| {
            if complex.is_boundary(v) {
                0.0
            } else {
                (1.0 - d.dist[v] / (2.0 * h)).max(0.0)
            }
        })
        .collect();
    if phi.iter().any(|&p| p > 0.0) {
        for delta in [h, 4.0 * h] {
            for i in 0..u.m() {
                let v = competitor_truncate(complex, u, &phi, delta, i)?;
                let v = positivity_mask(&v, tau)?.0;
                out.extend(local_record(
                    complex,
                    u,
                    &v,
                    q,
                    tau,
                    MoveClass::Truncation,
                    x0,
                    delta,
                    i as f64,
                ));
            }
        }
    }
    for r in [2.0 * h, 4.0 * h] {
        let inner: Vec<usize> = ball(&d, r)
            .into_iter()
            .filter(|&v| !complex.is_boundary(v))
            .collect();
        if inner.is_empty() {
            continue;
        }
        let v = ball_replacement(complex, u, &inner, config)?;
        out.extend(local_record(
            complex,
            u,
            &v,
            q,
            tau,
            MoveClass::HarmonicReplacement,
            x0,
            r,
            0.0,
        ));
    }
    Ok(out)
}

/// Evaluates the move catalogue at `u`: the harmonic replacement on the whole
/// positivity set, all single flips of that replacement, cutoffs on dyadic
/// balls and tent truncations around the free-boundary band, and small-ball
/// harmonic replacements.
pub fn certify(
    complex: &MetricComplex,
    u: &VectorField,
    q: &QField,
    config: &SolveConfig,
) -> Result<MinimizerCertificate> {
    if u.num_vertices() != complex.num_vertices() || q.len() != complex.num_vertices() {
        return Err(Error::ShapeMismatch(
            "field or Q does not live on this complex".into(),
        ));
    }
    let tau = config.tau;
    let (u, mask) = positivity_mask(u, tau)?;
    let j = energy(complex, &u, q, tau)?.total;
    let tol = cert_tol(j);
    let g = u.boundary_data().clone();
    let mut records = Vec::new();
    let mut flips_tested = 0;
    let mut flip_worst = f64::INFINITY;

    // global harmonic replacement, then flips relative to it
    let st = solve_mask(complex, q, &g, &mask.mask, tau)?;
    let dh = st.energy.total - j;
    records.push(MoveRecord {
        class: MoveClass::HarmonicReplacement,
        center: None,
        size: 0.0,
        param: 0.0,
        delta: dh,
        field_dist: Some(crate::field::field_dist(&u, &st.field, complex)?),
    });
    let ctx = FlipContext::new(&st, complex, tau);
    let mut flips = evaluate_flips(complex, q, &st, &ctx, tau, config.exec);
    flips.sort_by(|a, b| a.delta.total_cmp(&b.delta).then(a.vertex.cmp(&b.vertex)));
    for (k, f) in flips.iter().enumerate() {
        let delta = dh + f.delta;
        flips_tested += 1;
        flip_worst = flip_worst.min(delta);
        if k < FLIP_DIST_RECORDS {
            let re = flipped(complex, q, &g, &st, f.vertex, tau)?;
            records.push(MoveRecord {
                class: MoveClass::Flip,
                center: Some(f.vertex),
                size: 0.0,
                param: if f.add { 1.0 } else { 0.0 },
                delta,
                field_dist: Some(crate::field::field_dist(&u, &re.field, complex)?),
            });
        }
    }

    let band_mask: Vec<bool> = (0..complex.num_vertices()).map(|v| mask.get(v)).collect();
    let band = free_boundary_band(complex, &band_mask);
    let radii = dyadic_radii(complex.mesh_size(), diameter(complex));
    let local = config
        .exec
        .map(&band, |&x0| moves_at(complex, &u, q, x0, &radii, config));
    for r in local {
        records.extend(r?);
    }

    let mut classes = Vec::new();
    for class in [
        MoveClass::Truncation,
        MoveClass::Cutoff,
        MoveClass::HarmonicReplacement,
        MoveClass::Flip,
    ] {
        let (tested, worst) = if class == MoveClass::Flip {
            (flips_tested, flip_worst)
        } else {
            let sel: Vec<f64> = records
                .iter()
                .filter(|r| r.class == class)
                .map(|r| r.delta)
                .collect();
            (sel.len(), sel.iter().copied().fold(f64::INFINITY, f64::min))
        };
        classes.push(ClassVerdict {
            class,
            tested,
            worst_delta: worst,
            valid: !(worst < -tol),
        });
    }
    let worst_margin = classes
        .iter()
        .map(|c| c.worst_delta)
        .fold(f64::INFINITY, f64::min);
    let worst_move = records
        .iter().find(|r| r.delta == worst_margin).cloned();
    let valid = classes.iter().all(|c| c.valid);
    Ok(MinimizerCertificate {
        energy: j,
        tol,
        classes,
        worst_margin,
        worst_move,
        records,
        valid,
    })
}
