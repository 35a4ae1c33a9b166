//! Continuation in the relaxation width with projected, Sobolev-
//! preconditioned descent, followed by snap-then-mask and a harmonic
//! replacement on the final positivity set.

use super::{diameter, SolveConfig, SolveResult};
use crate::energy::{beta, energy};
use crate::error::{Error, Result};
use crate::field::{positivity_mask, BoundaryData, QField, VectorField};
use crate::geometry::MetricComplex;
use crate::harmonic::{solve_dirichlet_with_stats, DirichletProblem};
use crate::linalg::{ReducedSystem, SparseLdl};
use crate::numeric::csum;

/// Geometric schedule `eps0 > eps0 r > ...` ending at the first width
/// `<= eps_final_h * h`.
pub fn relaxation_schedule(complex: &MetricComplex, config: &SolveConfig) -> Result<Vec<f64>> {
    if !(config.eps_ratio > 0.0 && config.eps_ratio < 1.0) {
        return Err(Error::param(format!(
            "schedule ratio {} must lie in (0, 1)",
            config.eps_ratio
        )));
    }
    let h = complex.mesh_size();
    let target = config.eps_final_h * h;
    if !(target > 0.0) {
        return Err(Error::param("final relaxation width must be positive"));
    }
    let mut eps = config.eps0.unwrap_or_else(|| diameter(complex) / 10.0);
    if !(eps > 0.0) {
        return Err(Error::param(format!(
            "initial relaxation width {eps} must be positive"
        )));
    }
    let mut out = vec![eps];
    while eps > target {
        eps *= config.eps_ratio;
        out.push(eps);
    }
    Ok(out)
}

/// Relaxed energy over interior variables, per-vertex bulk `m Q beta(|u|)`.
struct Relaxed<'a> {
    complex: &'a MetricComplex,
    q: &'a QField,
    sys: &'a ReducedSystem,
    /// Full-length component vectors; boundary entries hold the data.
    base: Vec<Vec<f64>>,
}

impl Relaxed<'_> {
    fn norm_at(x: &[Vec<f64>], k: usize) -> f64 {
        x.iter().map(|c| c[k] * c[k]).sum::<f64>().sqrt()
    }

    fn full(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .zip(&self.base)
            .map(|(xi, b)| {
                let mut f = b.clone();
                self.sys.scatter(xi, &mut f);
                f
            })
            .collect()
    }

    fn value(&self, x: &[Vec<f64>], eps: f64) -> f64 {
        let full = self.full(x);
        let dir = csum(self.complex.edges().iter().map(|e| {
            let d2: f64 = full.iter().map(|c| (c[e.i] - c[e.j]).powi(2)).sum();
            e.w * d2
        }));
        let bulk =
            csum(self.sys.free.iter().enumerate().map(|(k, &v)| {
                self.complex.mass(v) * self.q.at(v) * beta(Self::norm_at(x, k), eps)
            }));
        dir + bulk
    }

    /// Gradient with respect to the interior variables. At `u_v = 0` the
    /// one-sided derivative `m Q / eps` is used in every component.
    fn gradient(&self, x: &[Vec<f64>], b: &[Vec<f64>], eps: f64) -> Vec<Vec<f64>> {
        let a = &self.sys.matrix;
        let mut grad: Vec<Vec<f64>> = x
            .iter()
            .zip(b)
            .map(|(xi, bi)| {
                let mut ax = vec![0.0; xi.len()];
                a.mul(xi, &mut ax);
                ax.iter().zip(bi).map(|(p, q)| 2.0 * (p - q)).collect()
            })
            .collect();
        for (k, &v) in self.sys.free.iter().enumerate() {
            let s = Self::norm_at(x, k);
            let c = self.complex.mass(v) * self.q.at(v) / eps;
            if s == 0.0 {
                for gi in grad.iter_mut() {
                    gi[k] += c;
                }
            } else if s < eps {
                for (gi, xi) in grad.iter_mut().zip(x) {
                    gi[k] += c * xi[k] / s;
                }
            }
        }
        grad
    }
}

/// Relaxed continuation solver. The returned energy is the exact functional
/// of the final (snapped, harmonically replaced) field.
pub fn solve_relaxed(
    complex: &MetricComplex,
    q: &QField,
    g: &BoundaryData,
    config: &SolveConfig,
) -> Result<SolveResult> {
    let n = complex.num_vertices();
    if q.len() != n {
        return Err(Error::ShapeMismatch("Q length".into()));
    }
    let m = g.m();
    let schedule = relaxation_schedule(complex, config)?;
    let interior: Vec<bool> = (0..n).map(|v| !complex.is_boundary(v)).collect();
    let sys = ReducedSystem::new(complex, &interior);
    let base: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut f = vec![0.0; n];
            for (v, gv) in g.iter() {
                f[v] = gv[i];
            }
            f
        })
        .collect();
    let fac = SparseLdl::factor(&sys.matrix)?;
    let b: Vec<Vec<f64>> = base.iter().map(|f| sys.rhs(complex, f)).collect();
    // harmonic extension of g
    let harm: Vec<Vec<f64>> = b
        .iter()
        .map(|bi| fac.solve(bi).into_iter().map(|y| y.max(0.0)).collect())
        .collect();
    let problem = Relaxed {
        complex,
        q,
        sys: &sys,
        base,
    };

    let mut x = harm.clone();
    let mut history = Vec::with_capacity(schedule.len());
    let mut converged = true;
    let mut iterations = 0;
    for &eps in &schedule {
        let mut e = problem.value(&x, eps);
        let mut level = vec![e];
        let mut level_done = false;
        for _ in 0..config.max_iter {
            iterations += 1;
            let grad = problem.gradient(&x, &b, eps);
            // d = -P (2A)^{-1} P grad, with P dropping variables held at zero
            // by the bound; a descent direction for the projected problem
            let active: Vec<Vec<bool>> = x
                .iter()
                .zip(&grad)
                .map(|(xi, gi)| {
                    xi.iter()
                        .zip(gi)
                        .map(|(a, g)| *a <= 0.0 && *g > 0.0)
                        .collect()
                })
                .collect();
            let dir: Vec<Vec<f64>> = grad
                .iter()
                .zip(&active)
                .map(|(gi, act)| {
                    let pg: Vec<f64> = gi
                        .iter()
                        .zip(act)
                        .map(|(g, a)| if *a { 0.0 } else { *g })
                        .collect();
                    fac.solve(&pg)
                        .into_iter()
                        .zip(act)
                        .map(|(y, a)| if *a { 0.0 } else { -0.5 * y })
                        .collect()
                })
                .collect();
            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-14 {
                let trial: Vec<Vec<f64>> = x
                    .iter()
                    .zip(&dir)
                    .map(|(xi, di)| {
                        xi.iter()
                            .zip(di)
                            .map(|(a, d)| (a + t * d).max(0.0))
                            .collect()
                    })
                    .collect();
                let slope: f64 = grad
                    .iter()
                    .zip(trial.iter().zip(&x))
                    .map(|(gi, (ti, xi))| {
                        gi.iter()
                            .zip(ti.iter().zip(xi))
                            .map(|(g, (a, b))| g * (a - b))
                            .sum::<f64>()
                    })
                    .sum();
                let et = problem.value(&trial, eps);
                if et <= e + config.armijo * slope.min(0.0) && et <= e {
                    accepted = Some((trial, et));
                    break;
                }
                t *= 0.5;
            }
            let Some((trial, et)) = accepted else {
                level_done = true;
                break;
            };
            let decrease = e - et;
            x = trial;
            e = et;
            level.push(e);
            if decrease <= config.rel_tol * e.abs().max(f64::MIN_POSITIVE) {
                level_done = true;
                break;
            }
        }
        if !level_done {
            converged = false;
            log::warn!("relaxed descent hit the iteration cap at eps = {eps:.3e}");
        }
        history.push(level);
    }

    // snap, then harmonic replacement per component on the positivity set
    let relaxed_field = VectorField::from_components(complex, &problem.full(&x), g.clone())?;
    let (snapped, mask) = positivity_mask(&relaxed_field, config.tau)?;
    let mut comps = Vec::with_capacity(m);
    for i in 0..m {
        let values = snapped.component(i);
        let fixed: Vec<bool> = (0..n)
            .map(|v| complex.is_boundary(v) || !mask.mask[v])
            .collect();
        let guess = values.clone();
        let p = DirichletProblem::new(complex, fixed, values)
            .map(|p| p.with_tolerance(config.cg_tol, 20 * n + 100))?;
        let (u, _) = solve_dirichlet_with_stats(&p, Some(&guess))?;
        comps.push(u.into_iter().map(|y| y.max(0.0)).collect());
    }
    let replaced = VectorField::from_components(complex, &comps, g.clone())?;
    let (field, _) = positivity_mask(&replaced, config.tau)?;
    let report = energy(complex, &field, q, config.tau)?;
    Ok(SolveResult {
        field,
        energy: report,
        converged,
        iterations,
        history,
    })
}
