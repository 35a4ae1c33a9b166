//! Discrete minimizers of the Bernoulli functional: a relaxed continuation
//! solver, an exact set-move local search, a brute-force oracle for small
//! instances and a move-catalogue certificate.

mod certify;
mod oracle;
mod relaxed;
mod setmove;
mod state;

pub use certify::{certify, ClassVerdict, MinimizerCertificate, MoveClass, MoveRecord};
pub use oracle::{
    brute_force_oracle, oracle_general, oracle_intervals, OracleResult, ORACLE_MAX_INTERIOR,
};
pub use relaxed::{relaxation_schedule, solve_relaxed};
pub use setmove::solve_setmove;
pub use state::{free_boundary_band, harmonic_on_mask};

use crate::energy::EnergyReport;
use crate::exec::Exec;
use crate::field::VectorField;
use crate::geometry::{intrinsic_distances, MetricComplex};
use crate::harmonic::DEFAULT_CG_TOL;
use crate::DEFAULT_TAU;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// First relaxation width; `None` means domain diameter / 10.
    pub eps0: Option<f64>,
    /// Geometric ratio of the schedule.
    pub eps_ratio: f64,
    /// The schedule stops at the first width `<= eps_final_h * h`.
    pub eps_final_h: f64,
    /// Armijo constant of the backtracking line search.
    pub armijo: f64,
    /// Descent iterations per relaxation width.
    pub max_iter: usize,
    /// Relative energy decrease that ends descent at one width.
    pub rel_tol: f64,
    /// Positivity threshold.
    pub tau: f64,
    /// Seed for proposal ordering in the set-move search.
    pub seed: u64,
    /// Relative residual of conjugate-gradient solves.
    pub cg_tol: f64,
    /// Accepted-move cap of the set-move search.
    pub max_moves: usize,
    /// Ball-removal proposals in the set-move search.
    pub cutoff_moves: bool,
    /// Ball removals re-solved exactly per set-move iteration.
    pub max_exact_cutoffs: usize,
    pub exec: Exec,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            eps0: None,
            eps_ratio: 0.5,
            eps_final_h: 1.0 / 16.0,
            armijo: 1e-4,
            max_iter: 400,
            rel_tol: 1e-10,
            tau: DEFAULT_TAU,
            seed: 0,
            cg_tol: DEFAULT_CG_TOL,
            max_moves: 100_000,
            cutoff_moves: true,
            max_exact_cutoffs: 16,
            exec: Exec::default(),
        }
    }
}

/// Output of either solver.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub field: VectorField,
    pub energy: EnergyReport,
    pub converged: bool,
    /// Descent iterations (relaxed) or accepted moves (set-move).
    pub iterations: usize,
    /// Energy after every accepted step; for the relaxed solver the relaxed
    /// energy, one block per width.
    pub history: Vec<Vec<f64>>,
}

/// Diameter estimate by a double sweep of intrinsic distances.
pub fn diameter(complex: &MetricComplex) -> f64 {
    let d0 = intrinsic_distances(complex, 0).expect("vertex 0 exists");
    let far = (0..complex.num_vertices())
        .filter(|&v| d0.dist[v].is_finite())
        .max_by(|&a, &b| d0.dist[a].total_cmp(&d0.dist[b]))
        .unwrap_or(0);
    let d1 = intrinsic_distances(complex, far).expect("vertex exists");
    d1.dist
        .iter()
        .copied()
        .filter(|d| d.is_finite())
        .fold(0.0, f64::max)
}

/// Relative certificate tolerance.
pub const CERT_REL_TOL: f64 = 1e-8;

pub(crate) fn cert_tol(j: f64) -> f64 {
    CERT_REL_TOL * j.abs()
}

/// Dyadic ball radii `2h, 4h, ...` up to the first one reaching the diameter.
pub(crate) fn dyadic_radii(h: f64, diam: f64) -> Vec<f64> {
    let k = (diam / h).log2().ceil().max(1.0) as i32;
    (1..=k).map(|j| h * 2f64.powi(j)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::energy;
    use crate::field::{BoundaryData, PositivityMask, QField};
    use crate::geometry::{build_interval, build_interval_between, build_rectangle};

    fn chain(n: usize) -> (MetricComplex, QField, BoundaryData) {
        let c = build_interval_between(n, 0.0, 2.0).unwrap();
        let q = QField::constant(n, 4.0).unwrap();
        let g = BoundaryData::from_fn(&c, 1, |v| vec![if v == 0 { 1.0 } else { 0.0 }]).unwrap();
        (c, q, g)
    }

    fn front(u: &VectorField, c: &MetricComplex) -> f64 {
        (0..c.num_vertices())
            .filter(|&v| u.norm(v) > DEFAULT_TAU)
            .map(|v| c.coords()[v][0])
            .fold(0.0, f64::max)
            + c.mesh_size()
    }

    #[test]
    fn schedule_is_decreasing_and_reaches_target() {
        let (c, _, _) = chain(101);
        let s = relaxation_schedule(&c, &SolveConfig::default()).unwrap();
        assert!(s.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        assert!(*s.last().unwrap() <= c.mesh_size() / 16.0);
        assert!((s[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_solvers_agree_with_closed_form() {
        let (c, q, g) = chain(101);
        let h = c.mesh_size();
        let cfg = SolveConfig::default();
        let r = solve_relaxed(&c, &q, &g, &cfg).unwrap();
        assert!(
            (r.energy.total - 4.0).abs() / 4.0 <= 5.0 * h,
            "{}",
            r.energy.total
        );
        assert!((front(&r.field, &c) - 0.5).abs() <= 2.0 * h);
        let full = PositivityMask::from_vec(vec![true; c.num_vertices()], cfg.tau);
        let s = solve_setmove(&c, &q, &g, &full, &cfg).unwrap();
        assert!(s.converged);
        assert!(s.history[0].windows(2).all(|w| w[1] <= w[0]));
        assert!((s.energy.total - r.energy.total).abs() <= 1e-8 * r.energy.total);
        let o = brute_force_oracle(&c, &q, &g, &cfg).unwrap();
        assert!(o.intervals_only);
        assert!((o.energy - s.energy.total).abs() <= 1e-8 * o.energy);
        let cert = certify(&c, &s.field, &q, &cfg).unwrap();
        assert!(cert.valid, "{:?}", cert.worst_move);
    }

    #[test]
    fn zero_data_gives_zero() {
        let c = build_rectangle(6, 6, 1.0, 1.0).unwrap();
        let n = c.num_vertices();
        let q = QField::constant(n, 1.0).unwrap();
        let g = BoundaryData::zero(&c, 2).unwrap();
        let cfg = SolveConfig::default();
        let r = solve_relaxed(&c, &q, &g, &cfg).unwrap();
        assert_eq!(r.energy.total, 0.0);
        let s = solve_setmove(
            &c,
            &q,
            &g,
            &PositivityMask::from_vec(vec![false; n], cfg.tau),
            &cfg,
        )
        .unwrap();
        assert!(s.converged && s.iterations == 0 && s.energy.total == 0.0);
        let o = brute_force_oracle(&c, &q, &g, &cfg).unwrap();
        assert_eq!(o.energy, 0.0);
        assert_eq!(o.mask.count(), 0);
        assert!(certify(&c, &r.field, &q, &cfg).unwrap().valid);
    }

    #[test]
    fn interval_oracle_matches_general_enumeration() {
        let (c, q, g) = chain(12);
        let cfg = SolveConfig::default();
        let a = oracle_general(&c, &q, &g, &cfg).unwrap();
        let b = oracle_intervals(&c, &q, &g, &cfg).unwrap();
        assert_eq!(a.mask, b.mask);
        assert!((a.energy - b.energy).abs() <= 1e-12 * a.energy);
        // leftmost interval ending near 1/2
        let last = (0..12).filter(|&v| a.mask.get(v)).max().unwrap();
        assert!((c.coords()[last + 1][0] - 0.5).abs() <= c.mesh_size());
        assert!(matches!(
            oracle_general(
                &build_interval(20, 1.0).unwrap(),
                &QField::constant(20, 1.0).unwrap(),
                &BoundaryData::zero(&build_interval(20, 1.0).unwrap(), 1).unwrap(),
                &cfg
            ),
            Err(crate::Error::TooLarge {
                actual: 18,
                limit: 16
            })
        ));
    }

    #[test]
    fn oracle_bounds_both_solvers_in_two_dimensions() {
        let c = build_rectangle(6, 5, 1.0, 0.8).unwrap();
        let n = c.num_vertices();
        let q = QField::new((0..n).map(|v| 1.0 + 0.5 * (v % 3) as f64).collect()).unwrap();
        let g = BoundaryData::from_fn(&c, 2, |v| {
            let x = c.coords()[v][0];
            vec![(0.5 - x).max(0.0), 0.4 * (0.5 - x).max(0.0)]
        })
        .unwrap();
        let cfg = SolveConfig::default();
        let o = brute_force_oracle(&c, &q, &g, &cfg).unwrap();
        let r = solve_relaxed(&c, &q, &g, &cfg).unwrap();
        let init = PositivityMask::of(&r.field, cfg.tau);
        let s = solve_setmove(&c, &q, &g, &init, &cfg).unwrap();
        assert!(r.energy.total >= o.energy * (1.0 - 1e-8));
        assert!(s.energy.total >= o.energy * (1.0 - 1e-8));
        assert!(certify(&c, &s.field, &q, &cfg).unwrap().valid);
    }

    #[test]
    fn perturbation_breaks_the_certificate() {
        let (c, q, g) = chain(41);
        let cfg = SolveConfig::default();
        let s = solve_setmove(
            &c,
            &q,
            &g,
            &PositivityMask::from_vec(vec![true; 41], cfg.tau),
            &cfg,
        )
        .unwrap();
        let zero = (1..40)
            .find(|&v| s.field.norm(v) == 0.0 && s.field.norm(v - 1) > 0.0)
            .unwrap();
        let mut u = s.field.clone();
        u.set_interior(&c, zero, 0, 0.1).unwrap();
        assert!(energy(&c, &u, &q, cfg.tau).unwrap().total > s.energy.total);
        let cert = certify(&c, &u, &q, &cfg).unwrap();
        assert!(!cert.valid);
        assert!(
            !cert.class(MoveClass::HarmonicReplacement).unwrap().valid
                || !cert.class(MoveClass::Flip).unwrap().valid
        );
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let c = build_rectangle(9, 9, 1.0, 1.0).unwrap();
        let n = c.num_vertices();
        let q = QField::constant(n, 2.0).unwrap();
        let g = BoundaryData::from_fn(&c, 1, |v| vec![(0.6 - c.coords()[v][0]).max(0.0)]).unwrap();
        let cfg = SolveConfig {
            seed: 7,
            ..SolveConfig::default()
        };
        let init = PositivityMask::from_vec(vec![true; n], cfg.tau);
        let a = solve_setmove(&c, &q, &g, &init, &cfg).unwrap();
        let b = solve_setmove(&c, &q, &g, &init, &cfg).unwrap();
        assert_eq!(a.field, b.field);
        assert_eq!(a.energy.total.to_bits(), b.energy.total.to_bits());
        let seq = SolveConfig {
            exec: crate::Exec::Sequential,
            ..cfg.clone()
        };
        let d = solve_setmove(&c, &q, &g, &init, &seq).unwrap();
        assert_eq!(a.field, d.field);
    }
}
