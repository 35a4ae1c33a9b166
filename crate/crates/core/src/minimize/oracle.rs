//! Exhaustive search over positivity sets, solved with conjugate gradients
//! (independently of the direct factorization used by the set-move search).

use super::SolveConfig;
use crate::energy::energy;
use crate::error::{Error, Result};
use crate::field::{BoundaryData, PositivityMask, QField, VectorField};
use crate::geometry::MetricComplex;
use crate::harmonic::{solve_dirichlet, DirichletProblem};

/// Interior-vertex bound for general enumeration.
pub const ORACLE_MAX_INTERIOR: usize = 16;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub mask: PositivityMask,
    pub energy: f64,
    pub field: VectorField,
    pub masks_evaluated: usize,
    /// Chains above the general bound are searched over masks made of an
    /// interval attached to each endpoint.
    pub intervals_only: bool,
}

fn is_chain(complex: &MetricComplex) -> bool {
    let n = complex.num_vertices();
    complex.intrinsic_dim() == 1
        && complex.num_edges() == n - 1
        && complex
            .edges()
            .iter()
            .enumerate()
            .all(|(k, e)| e.i == k && e.j == k + 1)
}

/// Harmonic field with the given interior mask, solved by CG; `None` if some
/// free component has no fixed vertex.
fn field_for_mask(
    complex: &MetricComplex,
    g: &BoundaryData,
    mask: &[bool],
    config: &SolveConfig,
) -> Result<Option<VectorField>> {
    let n = complex.num_vertices();
    let fixed: Vec<bool> = (0..n).map(|v| complex.is_boundary(v) || !mask[v]).collect();
    let mut comps = Vec::with_capacity(g.m());
    for i in 0..g.m() {
        let mut values = vec![0.0; n];
        for (v, gv) in g.iter() {
            values[v] = gv[i];
        }
        let p = match DirichletProblem::new(complex, fixed.clone(), values) {
            Ok(p) => p.with_tolerance(config.cg_tol.min(1e-12), 20 * n + 100),
            Err(Error::Precondition(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        comps.push(
            solve_dirichlet(&p)?
                .into_iter()
                .map(|x| x.max(0.0))
                .collect(),
        );
    }
    Ok(Some(VectorField::from_components(
        complex,
        &comps,
        g.clone(),
    )?))
}

fn tie_tol(j: f64) -> f64 {
    1e-12 * j.abs().max(1.0)
}

/// Picks the minimum energy; candidates within the tie tolerance are ordered
/// lexicographically by mask (vertex order, `false < true`).
fn select(cands: Vec<(f64, Vec<bool>)>) -> Option<(f64, Vec<bool>)> {
    let jmin = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    cands
        .into_iter()
        .filter(|c| c.0 <= jmin + tie_tol(jmin))
        .min_by(|a, b| a.1.cmp(&b.1))
}

/// Global discrete minimum over all interior masks (at most
/// [`ORACLE_MAX_INTERIOR`] interior vertices).
pub fn oracle_general(
    complex: &MetricComplex,
    q: &QField,
    g: &BoundaryData,
    config: &SolveConfig,
) -> Result<OracleResult> {
    let interior = complex.interior_vertices();
    let k = interior.len();
    if k > ORACLE_MAX_INTERIOR {
        return Err(Error::TooLarge {
            actual: k,
            limit: ORACLE_MAX_INTERIOR,
        });
    }
    let n = complex.num_vertices();
    let mask_of = |bits: usize| -> Vec<bool> {
        let mut m = vec![false; n];
        for (j, &v) in interior.iter().enumerate() {
            m[v] = bits >> j & 1 == 1;
        }
        m
    };
    let total = 1usize << k;
    let results = config.exec.map_range(total, |bits| -> Result<Option<f64>> {
        match field_for_mask(complex, g, &mask_of(bits), config)? {
            Some(f) => Ok(Some(energy(complex, &f, q, config.tau)?.total)),
            None => Ok(None),
        }
    });
    let mut cands = Vec::with_capacity(total);
    for (bits, r) in results.into_iter().enumerate() {
        if let Some(j) = r? {
            cands.push((j, mask_of(bits)));
        }
    }
    finish(complex, q, g, config, cands, total, false)
}

/// Minimum over chain masks `{1..k} u {n-1-j..n-2}`. Pieces separated by at
/// least one zero vertex do not interact, so each side is solved once per
/// length and combined.
pub fn oracle_intervals(
    complex: &MetricComplex,
    q: &QField,
    g: &BoundaryData,
    config: &SolveConfig,
) -> Result<OracleResult> {
    if !is_chain(complex) {
        return Err(Error::pre("interval oracle needs a chain"));
    }
    let n = complex.num_vertices();
    let inner = n - 2;
    let mask_lr = |k: usize, j: usize| -> Vec<bool> {
        (0..n)
            .map(|v| (v >= 1 && v <= k) || (v + 1 + j >= n && v + 1 < n))
            .collect()
    };
    let eval = |mask: Vec<bool>| -> Result<f64> {
        let f = field_for_mask(complex, g, &mask, config)?
            .ok_or_else(|| Error::pre("chain without fixed endpoint"))?;
        Ok(energy(complex, &f, q, config.tau)?.total)
    };
    let left = config.exec.map_range(inner, |k| eval(mask_lr(k, 0)));
    let right = config.exec.map_range(inner, |j| eval(mask_lr(0, j)));
    let left: Vec<f64> = left.into_iter().collect::<Result<_>>()?;
    let right: Vec<f64> = right.into_iter().collect::<Result<_>>()?;
    let base = left[0];
    let mut cands = Vec::new();
    for k in 0..inner {
        for j in 0..inner - k {
            if k + j < inner {
                cands.push((left[k] + right[j] - base, (k, j)));
            }
        }
    }
    let full = eval(mask_lr(inner, 0))?;
    let jmin = cands.iter().map(|c| c.0).fold(full, f64::min);
    let mut tied: Vec<(f64, Vec<bool>)> = cands
        .into_iter()
        .filter(|c| c.0 <= jmin + tie_tol(jmin))
        .map(|(e, (k, j))| (e, mask_lr(k, j)))
        .collect();
    if full <= jmin + tie_tol(jmin) {
        tied.push((full, mask_lr(inner, 0)));
    }
    finish(complex, q, g, config, tied, 2 * inner + 1, true)
}

fn finish(
    complex: &MetricComplex,
    q: &QField,
    g: &BoundaryData,
    config: &SolveConfig,
    cands: Vec<(f64, Vec<bool>)>,
    evaluated: usize,
    intervals_only: bool,
) -> Result<OracleResult> {
    let (_, mask) = select(cands).ok_or_else(|| Error::pre("no admissible mask"))?;
    let field = field_for_mask(complex, g, &mask, config)?
        .ok_or_else(|| Error::pre("no admissible mask"))?;
    let report = energy(complex, &field, q, config.tau)?;
    Ok(OracleResult {
        mask: PositivityMask::of(&field, config.tau),
        energy: report.total,
        field,
        masks_evaluated: evaluated,
        intervals_only,
    })
}

/// General enumeration up to [`ORACLE_MAX_INTERIOR`] interior vertices;
/// longer chains fall back to interval masks; anything else is refused.
pub fn brute_force_oracle(
    complex: &MetricComplex,
    q: &QField,
    g: &BoundaryData,
    config: &SolveConfig,
) -> Result<OracleResult> {
    let k = complex.interior_vertices().len();
    if k <= ORACLE_MAX_INTERIOR {
        oracle_general(complex, q, g, config)
    } else if is_chain(complex) {
        oracle_intervals(complex, q, g, config)
    } else {
        Err(Error::TooLarge {
            actual: k,
            limit: ORACLE_MAX_INTERIOR,
        })
    }
}
