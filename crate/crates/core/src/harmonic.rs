//! Dirichlet problems, the Laplacian measure of a field and harmonicity
//! diagnostics.
//!
//! Reports use the analyst's sign: `(Delta u)_v = sum_e w_e (u_nbr - u_v)`,
//! the negative of [`MetricComplex::apply_laplacian`].

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::geometry::{ball, DistanceField, MetricComplex};
use crate::linalg::{conjugate_gradient, CgStats, ReducedSystem};
use std::collections::VecDeque;

pub const DEFAULT_CG_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DirichletProblem<'a> {
    pub complex: &'a MetricComplex,
    /// `true` where the value is prescribed.
    pub fixed: Vec<bool>,
    /// Full-length vector; only entries on fixed vertices are read.
    pub values: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl<'a> DirichletProblem<'a> {
    /// Validates that every connected component of the free set touches a
    /// fixed vertex.
    pub fn new(complex: &'a MetricComplex, fixed: Vec<bool>, values: Vec<f64>) -> Result<Self> {
        let n = complex.num_vertices();
        if fixed.len() != n || values.len() != n {
            return Err(Error::ShapeMismatch(
                "fixed set and values must cover every vertex".into(),
            ));
        }
        let mut seen = vec![false; n];
        for s in 0..n {
            if fixed[s] || seen[s] {
                continue;
            }
            let mut anchored = false;
            let mut q = VecDeque::from([s]);
            seen[s] = true;
            while let Some(v) = q.pop_front() {
                for &(nb, _) in complex.neighbors(v) {
                    if fixed[nb] {
                        anchored = true;
                    } else if !seen[nb] {
                        seen[nb] = true;
                        q.push_back(nb);
                    }
                }
            }
            if !anchored {
                return Err(Error::pre(format!(
                    "free component containing vertex {s} has no fixed vertex"
                )));
            }
        }
        let free = fixed.iter().filter(|f| !**f).count();
        Ok(Self {
            complex,
            fixed,
            values,
            tol: DEFAULT_CG_TOL,
            max_iter: 20 * free + 100,
        })
    }

    pub fn with_tolerance(mut self, tol: f64, max_iter: usize) -> Self {
        self.tol = tol;
        self.max_iter = max_iter;
        self
    }
}

/// Minimizes the Dirichlet energy subject to the fixed values.
pub fn solve_dirichlet(problem: &DirichletProblem) -> Result<Vec<f64>> {
    solve_dirichlet_with_stats(problem, None).map(|(u, _)| u)
}

/// As [`solve_dirichlet`], optionally warm-started from a full-length guess.
pub fn solve_dirichlet_with_stats(
    problem: &DirichletProblem,
    guess: Option<&[f64]>,
) -> Result<(Vec<f64>, CgStats)> {
    let c = problem.complex;
    let free: Vec<bool> = problem.fixed.iter().map(|f| !f).collect();
    let sys = ReducedSystem::new(c, &free);
    let b = sys.rhs(c, &problem.values);
    let x0 = guess.map(|g| sys.gather(g));
    let (x, stats) = conjugate_gradient(
        &sys.matrix,
        &b,
        x0.as_deref(),
        problem.tol,
        problem.max_iter,
    )?;
    let mut out = problem.values.clone();
    sys.scatter(&x, &mut out);
    Ok((out, stats))
}

/// Analyst-sign Laplacian per component.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMeasure {
    pub values: Vec<Vec<f64>>,
}

impl LaplacianMeasure {
    pub fn component(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn total(&self, i: usize, set: &[usize]) -> f64 {
        crate::numeric::csum(set.iter().map(|&v| self.values[i][v]))
    }
}

pub fn laplacian_measure(complex: &MetricComplex, u: &VectorField) -> LaplacianMeasure {
    let values = (0..u.m())
        .map(|i| {
            complex
                .apply_laplacian(&u.component(i))
                .into_iter()
                .map(|x| -x)
                .collect()
        })
        .collect();
    LaplacianMeasure { values }
}

/// `|grad u|` at a vertex from the local energy density
/// `sum_{e ni v} w_e (du)^2 / (2 m_v)`.
pub fn vertex_gradient(complex: &MetricComplex, u: &[f64], v: usize) -> f64 {
    let s: f64 = complex
        .neighbors(v)
        .iter()
        .map(|&(nb, k)| complex.edges()[k].w * (u[v] - u[nb]).powi(2))
        .sum();
    (s / (2.0 * complex.mass(v))).sqrt()
}

fn positive_on(u: &[f64], set: &[usize]) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptySet("ball contains no vertices".into()));
    }
    if let Some(&v) = set.iter().find(|&&v| !(u[v] > 0.0)) {
        return Err(Error::pre(format!("field is not positive at vertex {v}")));
    }
    Ok(())
}

/// `R * sup_{B_{R/2}} |grad u| / u` for `u > 0` on `B_R`.
pub fn cheng_yau_ratio(
    complex: &MetricComplex,
    u: &[f64],
    dist: &DistanceField,
    r: f64,
) -> Result<f64> {
    positive_on(u, &ball(dist, r))?;
    let inner = ball(dist, 0.5 * r);
    if inner.is_empty() {
        return Err(Error::EmptySet("half ball contains no vertices".into()));
    }
    Ok(inner
        .iter()
        .map(|&v| vertex_gradient(complex, u, v) / u[v])
        .fold(0.0, f64::max)
        * r)
}

/// `max / min` of `u > 0` over `B_{R/2}`.
pub fn harnack_ratio(u: &[f64], dist: &DistanceField, r: f64) -> Result<f64> {
    positive_on(u, &ball(dist, r))?;
    harnack_ratio_on(u, &ball(dist, 0.5 * r))
}

/// `max / min` of `u > 0` over an explicit sample set.
pub fn harnack_ratio_on(u: &[f64], set: &[usize]) -> Result<f64> {
    positive_on(u, set)?;
    let max = set.iter().map(|&v| u[v]).fold(f64::MIN, f64::max);
    let min = set.iter().map(|&v| u[v]).fold(f64::MAX, f64::min);
    Ok(max / min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_cone, build_interval, build_rectangle, intrinsic_distances};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn boundary_problem<'a>(
        c: &'a MetricComplex,
        g: impl Fn(usize) -> f64,
    ) -> DirichletProblem<'a> {
        let fixed = c.boundary().to_vec();
        let values = (0..c.num_vertices())
            .map(|v| if fixed[v] { g(v) } else { 0.0 })
            .collect();
        DirichletProblem::new(c, fixed, values).unwrap()
    }

    #[test]
    fn constants_and_affine_data_are_reproduced() {
        let c = build_rectangle(9, 9, 1.0, 1.0).unwrap();
        let u = solve_dirichlet(&boundary_problem(&c, |_| 2.5)).unwrap();
        assert!(u.iter().all(|x| (x - 2.5).abs() < 1e-9));
        let c = build_interval(11, 3.0).unwrap();
        let u = solve_dirichlet(&boundary_problem(&c, |v| if v == 0 { 0.0 } else { 1.0 })).unwrap();
        for (v, x) in u.iter().enumerate() {
            assert!((x - v as f64 / 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn missing_anchor_is_rejected() {
        let c = build_rectangle(4, 4, 1.0, 1.0).unwrap();
        assert!(DirichletProblem::new(&c, vec![false; 16], vec![0.0; 16]).is_err());
    }

    #[test]
    fn solution_is_the_energy_minimizer() {
        let c = build_cone(1.5 * std::f64::consts::PI, 6, 18, 1.0).unwrap();
        let p = boundary_problem(&c, |v| c.cone_polar(v).unwrap().1.sin().abs());
        let u = solve_dirichlet(&p).unwrap();
        let e0 = c.dirichlet_energy(&u);
        for v in c.interior_vertices() {
            for d in [1e-3, -1e-3] {
                let mut w = u.clone();
                w[v] += d;
                assert!(c.dirichlet_energy(&w) > e0);
            }
        }
    }

    #[test]
    fn max_principle_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = build_rectangle(10, 8, 1.0, 0.8).unwrap();
        for _ in 0..100 {
            let fixed: Vec<bool> = (0..c.num_vertices())
                .map(|v| c.is_boundary(v) || rng.gen_bool(0.1))
                .collect();
            let values: Vec<f64> = (0..c.num_vertices())
                .map(|_| rng.gen_range(0.0..1.0))
                .collect();
            let lo = (0..values.len())
                .filter(|&v| fixed[v])
                .map(|v| values[v])
                .fold(f64::MAX, f64::min);
            let hi = (0..values.len())
                .filter(|&v| fixed[v])
                .map(|v| values[v])
                .fold(f64::MIN, f64::max);
            let u = solve_dirichlet(&DirichletProblem::new(&c, fixed, values).unwrap()).unwrap();
            assert!(u.iter().all(|&x| x >= lo - 1e-9 && x <= hi + 1e-9));
        }
    }

    #[test]
    fn laplacian_measure_examples() {
        let c = build_rectangle(9, 9, 1.0, 1.0).unwrap();
        let u = VectorField::from_fn(&c, 1, |v| {
            vec![1.0 + 2.0 * c.coords()[v][0] + c.coords()[v][1]]
        })
        .unwrap();
        let lm = laplacian_measure(&c, &u);
        for v in c.interior_vertices() {
            assert!(lm.values[0][v].abs() < 1e-10);
        }
        // 1D kink (1 - x/a)^+ : flux 1/a at the kink vertex
        let n = 201;
        let c = build_interval(n, 2.0).unwrap();
        let a = 0.5;
        let u =
            VectorField::from_fn(&c, 1, |v| vec![(1.0 - c.coords()[v][0] / a).max(0.0)]).unwrap();
        let lm = laplacian_measure(&c, &u);
        let kink = 50;
        assert_relative_eq!(lm.values[0][kink], 1.0 / a, max_relative = 1e-10);
        for v in 1..n - 1 {
            if v != kink {
                assert!(lm.values[0][v].abs() < 1e-10);
            }
        }
        let z = VectorField::from_fn(&c, 1, |_| vec![0.0]).unwrap();
        assert!(laplacian_measure(&c, &z).values[0]
            .iter()
            .all(|x| *x == 0.0));
    }

    #[test]
    fn cheng_yau_examples() {
        let c = build_interval(201, 1.0).unwrap();
        let d = intrinsic_distances(&c, 100).unwrap();
        let one = vec![1.0; 201];
        assert_eq!(cheng_yau_ratio(&c, &one, &d, 1.0).unwrap(), 0.0);
        let u: Vec<f64> = c.coords().iter().map(|p| 1.0 + p[0]).collect();
        // sup of 1/(1+x) over the open half ball (0, 1) is attained next to x = 0
        let r = cheng_yau_ratio(&c, &u, &d, 1.0).unwrap();
        assert_relative_eq!(r, 1.0 / (1.0 + 0.005), max_relative = 1e-9);
        // radius 1/2: half ball (1/4, 3/4), sup at x = 1/4 + h
        let r = cheng_yau_ratio(&c, &u, &d, 0.5).unwrap();
        assert_relative_eq!(r, 0.5 / 1.255, max_relative = 1e-9);
        let bad: Vec<f64> = c.coords().iter().map(|p| p[0] - 0.5).collect();
        assert!(cheng_yau_ratio(&c, &bad, &d, 0.5).is_err());
    }

    #[test]
    fn harmonic_ratios_on_flat_suite() {
        // Harnack ratios are compared on the coarsest grid's vertices, which
        // every refinement contains, so only the discretization changes
        let mut harnack = Vec::new();
        for n in [17, 33, 65] {
            let c = build_rectangle(n, n, 1.0, 1.0).unwrap();
            let p = boundary_problem(&c, |v| 1.0 + c.coords()[v][0] * c.coords()[v][0]);
            let u = solve_dirichlet(&p).unwrap();
            let d = intrinsic_distances(&c, (n / 2) * n + n / 2).unwrap();
            assert!(cheng_yau_ratio(&c, &u, &d, 0.45).unwrap() <= 4.0);
            assert!(harnack_ratio(&u, &d, 0.45).unwrap().is_finite());
            let stride = (n - 1) / 16;
            let common: Vec<usize> = ball(&d, 0.225)
                .into_iter()
                .filter(|&v| (v % n) % stride == 0 && (v / n) % stride == 0)
                .collect();
            harnack.push(harnack_ratio_on(&u, &common).unwrap());
        }
        assert!(harnack.windows(2).all(|w| w[1] <= w[0]), "{harnack:?}");
    }

    proptest! {
        #[test]
        fn integration_by_parts_is_exact(
            phi in proptest::collection::vec(-1.0f64..1.0, 25),
            u in proptest::collection::vec(-1.0f64..1.0, 25),
        ) {
            let c = build_rectangle(5, 5, 1.0, 1.0).unwrap();
            let lu = c.apply_laplacian(&u);
            let lhs: f64 = phi.iter().zip(&lu).map(|(a, b)| a * b).sum();
            let rhs = c.dirichlet_pairing(&phi, &u);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }
}
