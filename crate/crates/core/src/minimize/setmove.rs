//! Exact local search over positivity sets: single-vertex flips evaluated by
//! rank-one updates of the factorized system, and ball removals re-solved
//! exactly, plus batches of independent flips and whole-layer dilations or
//! erosions. The best strictly improving move is accepted; ball removals
//! are searched only when nothing else improves. The search stops when no
//! move beats the certificate tolerance.

use super::state::{
    evaluate_flips, free_boundary_band, solve_mask, unreached_bulk, Flip, FlipContext, MaskState,
};
use super::{cert_tol, diameter, dyadic_radii, SolveConfig, SolveResult};
use crate::error::{Error, Result};
use crate::field::{BoundaryData, PositivityMask, QField};
use crate::geometry::{intrinsic_distances, MetricComplex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

#[derive(Debug, Clone)]
struct Proposal {
    /// Interior mask vertices to remove.
    removed: Vec<usize>,
    lower_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
enum MoveKey {
    Flip(usize),
    Ball(usize),
    Batch(usize),
    Dilate,
    Erode,
}

/// Mask grown (or shrunk) by the whole layer of interior vertices adjacent
/// to the other side.
fn layer(complex: &MetricComplex, mask: &[bool], grow: bool) -> Vec<bool> {
    let mut out = mask.to_vec();
    for v in 0..complex.num_vertices() {
        if complex.is_boundary(v) || mask[v] == grow {
            continue;
        }
        if complex.neighbors(v).iter().any(|&(w, _)| mask[w] == grow) {
            out[v] = grow;
        }
    }
    out
}

/// Greedy set of pairwise non-adjacent improving flips, best first.
fn independent_flips(complex: &MetricComplex, flips: &[Flip], tol: f64) -> Vec<Flip> {
    let mut cand: Vec<Flip> = flips.iter().filter(|f| f.delta < -tol).cloned().collect();
    cand.sort_by(|a, b| a.delta.total_cmp(&b.delta).then(a.vertex.cmp(&b.vertex)));
    let mut blocked = HashSet::new();
    let mut out = Vec::new();
    for f in cand {
        if blocked.contains(&f.vertex) {
            continue;
        }
        blocked.insert(f.vertex);
        blocked.extend(complex.neighbors(f.vertex).iter().map(|&(w, _)| w));
        out.push(f);
    }
    out
}

/// Ball-removal proposals around the free-boundary band with a lower bound
/// on their energy change; only those that might improve are kept.
fn ball_proposals(
    complex: &MetricComplex,
    q: &QField,
    st: &MaskState,
    ctx: &FlipContext,
    tol: f64,
    config: &SolveConfig,
) -> Result<Vec<Proposal>> {
    let Some(_) = &st.fac else {
        return Ok(Vec::new());
    };
    let full_mask: Vec<bool> = (0..complex.num_vertices())
        .map(|v| st.field.norm(v) > config.tau)
        .collect();
    let band = free_boundary_band(complex, &full_mask);
    let h = complex.mesh_size();
    let radii = dyadic_radii(h, diameter(complex));
    let total_bulk: f64 = st.sys.free.iter().map(|&v| q.at(v) * complex.mass(v)).sum();
    let per_center = config.exec.map(&band, |&x0| -> Result<Vec<Proposal>> {
        let d = intrinsic_distances(complex, x0)?;
        let mut out = Vec::new();
        let mut last_len = usize::MAX;
        for &r in &radii {
            for theta in [0.25, 0.5] {
                let removed: Vec<usize> = (0..st.sys.dim())
                    .filter(|&k| d.dist[st.sys.free[k]] < theta * r)
                    .collect();
                if removed.is_empty() || removed.len() == last_len {
                    continue;
                }
                last_len = removed.len();
                let max_d = removed
                    .iter()
                    .map(|&k| ctx.removal_dirichlet[k])
                    .fold(0.0, f64::max);
                let bulk: f64 = removed
                    .iter()
                    .map(|&k| q.at(st.sys.free[k]) * complex.mass(st.sys.free[k]))
                    .sum();
                // removing everything else as well cannot beat this bound
                if max_d - total_bulk >= -tol {
                    continue;
                }
                let mut flags = vec![false; st.sys.dim()];
                for &k in &removed {
                    flags[k] = true;
                }
                let lost = unreached_bulk(complex, q, st, &ctx.is_source, &flags);
                let lower_bound = max_d - bulk - lost;
                if lower_bound < -tol {
                    out.push(Proposal {
                        removed,
                        lower_bound,
                    });
                }
            }
        }
        Ok(out)
    });
    let mut seen = HashSet::new();
    let mut all = Vec::new();
    for p in per_center {
        for prop in p? {
            if seen.insert(prop.removed.clone()) {
                all.push(prop);
            }
        }
    }
    Ok(all)
}

type Best = Option<(f64, MoveKey, Vec<bool>)>;

fn consider(best: &mut Best, tol: f64, delta: f64, key: MoveKey, mask: &dyn Fn() -> Vec<bool>) {
    let better = match best {
        None => delta < -tol,
        Some((bd, bk, _)) => delta < *bd || (delta == *bd && key < *bk),
    };
    if better {
        *best = Some((delta, key, mask()));
    }
}

pub fn solve_setmove(
    complex: &MetricComplex,
    q: &QField,
    g: &BoundaryData,
    init: &PositivityMask,
    config: &SolveConfig,
) -> Result<SolveResult> {
    let n = complex.num_vertices();
    if init.mask.len() != n || q.len() != n {
        return Err(Error::ShapeMismatch("initial mask or Q length".into()));
    }
    for (v, gv) in g.iter() {
        let norm = gv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > config.tau && !init.mask[v] {
            return Err(Error::pre(format!(
                "boundary vertex {v} carries positive data but is outside the initial mask"
            )));
        }
    }
    let mut st = solve_mask(complex, q, g, &init.mask, config.tau)?;
    let mut history = vec![st.energy.total];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut converged = false;
    let mut moves = 0;
    while moves < config.max_moves {
        let j = st.energy.total;
        let tol = cert_tol(j);
        let ctx = FlipContext::new(&st, complex, config.tau);
        let mut best: Best = None;
        let flips = evaluate_flips(complex, q, &st, &ctx, config.tau, config.exec);
        let batch = independent_flips(complex, &flips, tol);
        for f in &flips {
            consider(&mut best, tol, f.delta, MoveKey::Flip(f.vertex), &|| {
                let mut m = st.mask.clone();
                m[f.vertex] = f.add;
                m
            });
        }
        if batch.len() > 1 {
            // flips apart from each other rarely interact; the exact re-solve decides
            let mut m = st.mask.clone();
            for f in &batch {
                m[f.vertex] = f.add;
            }
            let delta = solve_mask(complex, q, g, &m, config.tau)?.energy.total - j;
            consider(
                &mut best,
                tol,
                delta,
                MoveKey::Batch(batch[0].vertex),
                &|| m.clone(),
            );
        }
        for (grow, key) in [(true, MoveKey::Dilate), (false, MoveKey::Erode)] {
            let m = layer(complex, &st.mask, grow);
            if m != st.mask {
                let delta = solve_mask(complex, q, g, &m, config.tau)?.energy.total - j;
                consider(&mut best, tol, delta, key, &|| m.clone());
            }
        }
        // ball removals are only searched once single flips are exhausted
        if config.cutoff_moves && best.is_none() {
            let mut props = ball_proposals(complex, q, &st, &ctx, tol, config)?;
            props.shuffle(&mut rng);
            props.sort_by(|a, b| a.lower_bound.total_cmp(&b.lower_bound));
            props.truncate(config.max_exact_cutoffs);
            let masks: Vec<Vec<bool>> = props
                .iter()
                .map(|p| {
                    let mut m = st.mask.clone();
                    for &k in &p.removed {
                        m[st.sys.free[k]] = false;
                    }
                    m
                })
                .collect();
            let exact = config.exec.map(&masks, |m| {
                solve_mask(complex, q, g, m, config.tau).map(|s| s.energy.total)
            });
            for (p, (m, e)) in props.iter().zip(masks.iter().zip(exact)) {
                let delta = e? - j;
                consider(
                    &mut best,
                    tol,
                    delta,
                    MoveKey::Ball(st.sys.free[p.removed[0]]),
                    &|| m.clone(),
                );
            }
        }
        let Some((delta, key, mask)) = best else {
            converged = true;
            break;
        };
        let next = solve_mask(complex, q, g, &mask, config.tau)?;
        if next.energy.total > j - 0.5 * tol.max(f64::MIN_POSITIVE) {
            // predicted improvement not realized by the re-solve
            log::warn!(
                "move {key:?} predicted {delta:.3e} but did not decrease the energy; stopping"
            );
            break;
        }
        st = next;
        moves += 1;
        history.push(st.energy.total);
    }
    Ok(SolveResult {
        field: st.field,
        energy: st.energy,
        converged,
        iterations: moves,
        history: vec![history],
    })
}
