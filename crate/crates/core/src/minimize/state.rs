//! Harmonic fields on a fixed positivity set and exact single-vertex flip
//! energies obtained from the selected inverse of the reduced system.

use crate::energy::{energy, EnergyReport};
use crate::error::Result;
use crate::exec::Exec;
use crate::field::{positivity_mask, BoundaryData, PositivityMask, QField, VectorField};
use crate::geometry::MetricComplex;
use crate::linalg::{ReducedSystem, SelectedInverse, SparseLdl};

/// Harmonic field on an interior mask together with its factorized system.
pub(crate) struct MaskState {
    /// Interior vertices that are free (positive).
    pub mask: Vec<bool>,
    pub sys: ReducedSystem,
    pub fac: Option<SparseLdl>,
    pub field: VectorField,
    pub energy: EnergyReport,
}

fn fixed_values(complex: &MetricComplex, g: &BoundaryData, i: usize) -> Vec<f64> {
    let mut vals = vec![0.0; complex.num_vertices()];
    for (v, gv) in g.iter() {
        vals[v] = gv[i];
    }
    vals
}

/// Solves the `m` Dirichlet problems on `mask` (interior vertices only; data
/// `g` on the boundary, zero elsewhere) with a direct factorization. Vertices
/// that end up at `|u| <= tau` are dropped and the system re-solved.
pub(crate) fn solve_mask(
    complex: &MetricComplex,
    q: &QField,
    g: &BoundaryData,
    mask: &[bool],
    tau: f64,
) -> Result<MaskState> {
    let mut free: Vec<bool> = (0..complex.num_vertices())
        .map(|v| mask[v] && !complex.is_boundary(v))
        .collect();
    loop {
        let sys = ReducedSystem::new(complex, &free);
        let fac = if sys.dim() > 0 {
            Some(SparseLdl::factor(&sys.matrix)?)
        } else {
            None
        };
        let mut comps = Vec::with_capacity(g.m());
        for i in 0..g.m() {
            let mut vals = fixed_values(complex, g, i);
            if let Some(f) = &fac {
                let x = f.solve(&sys.rhs(complex, &vals));
                let x: Vec<f64> = x.into_iter().map(|y| y.max(0.0)).collect();
                sys.scatter(&x, &mut vals);
            }
            comps.push(vals);
        }
        let raw = VectorField::from_components(complex, &comps, g.clone())?;
        let (field, pm) = positivity_mask(&raw, tau)?;
        let dropped: Vec<usize> = (0..free.len())
            .filter(|&v| free[v] && !pm.mask[v])
            .collect();
        if dropped.is_empty() {
            let energy = energy(complex, &field, q, tau)?;
            return Ok(MaskState {
                mask: free,
                sys,
                fac,
                field,
                energy,
            });
        }
        for v in dropped {
            free[v] = false;
        }
    }
}

/// Harmonic replacement of every component on the positivity set `mask`,
/// returning the field and its exact energy.
pub fn harmonic_on_mask(
    complex: &MetricComplex,
    q: &QField,
    g: &BoundaryData,
    mask: &PositivityMask,
    tau: f64,
) -> Result<(VectorField, EnergyReport)> {
    let st = solve_mask(complex, q, g, &mask.mask, tau)?;
    Ok((st.field, st.energy))
}

/// Vertices with a neighbor on the other side of the mask.
pub fn free_boundary_band(complex: &MetricComplex, mask: &[bool]) -> Vec<usize> {
    (0..complex.num_vertices())
        .filter(|&v| {
            complex
                .neighbors(v)
                .iter()
                .any(|&(n, _)| mask[n] != mask[v])
        })
        .collect()
}

/// Free vertices adjacent to a fixed vertex with positive data.
fn sources(complex: &MetricComplex, st: &MaskState, tau: f64) -> Vec<bool> {
    st.sys
        .free
        .iter()
        .map(|&v| {
            complex
                .neighbors(v)
                .iter()
                .any(|&(n, _)| st.sys.local(n).is_none() && st.field.norm(n) > tau)
        })
        .collect()
}

/// For every free vertex `v`, the bulk `sum Q m` of the free pieces that lose
/// their connection to positive data when `v` is removed (articulation
/// points of the free graph with a super source attached to `sources`).
fn cut_bulk(complex: &MetricComplex, q: &QField, st: &MaskState, is_source: &[bool]) -> Vec<f64> {
    let nf = st.sys.dim();
    let root = nf;
    let bulk: Vec<f64> = st
        .sys
        .free
        .iter()
        .map(|&v| q.at(v) * complex.mass(v))
        .collect();
    let src: Vec<usize> = (0..nf).filter(|&k| is_source[k]).collect();
    let degree = |x: usize| {
        if x == root {
            src.len()
        } else {
            st.sys.matrix.rows[x].len() + usize::from(is_source[x])
        }
    };
    // the super source is adjacent to every source vertex
    let neighbor = |x: usize, k: usize| {
        if x == root {
            src[k]
        } else if k < st.sys.matrix.rows[x].len() {
            st.sys.matrix.rows[x][k].0
        } else {
            root
        }
    };
    let mut disc = vec![usize::MAX; nf + 1];
    let mut low = vec![0usize; nf + 1];
    let mut sub = vec![0.0; nf + 1];
    let mut cut = vec![0.0; nf];
    disc[root] = 0;
    low[root] = 0;
    let mut time = 1;
    // iterative DFS frames: (node, parent, next neighbor position)
    let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
    while let Some(top) = stack.last_mut() {
        let (v, parent, pos) = *top;
        if pos < degree(v) {
            top.2 += 1;
            let w = neighbor(v, pos);
            if disc[w] == usize::MAX {
                disc[w] = time;
                low[w] = time;
                time += 1;
                stack.push((w, v, 0));
            } else if w != parent {
                low[v] = low[v].min(disc[w]);
            }
        } else {
            stack.pop();
            if v != root {
                sub[v] += bulk[v];
            }
            if parent != usize::MAX {
                low[parent] = low[parent].min(low[v]);
                sub[parent] += sub[v];
                if parent != root && low[v] >= disc[parent] {
                    cut[parent] += sub[v];
                }
            }
        }
    }
    cut
}

/// Bulk of the free vertices not reachable from positive data once the
/// vertices flagged in `removed` are taken out of the mask.
pub(crate) fn unreached_bulk(
    complex: &MetricComplex,
    q: &QField,
    st: &MaskState,
    is_source: &[bool],
    removed: &[bool],
) -> f64 {
    let nf = st.sys.dim();
    let mut seen = vec![false; nf];
    let mut queue: Vec<usize> = (0..nf).filter(|&k| is_source[k] && !removed[k]).collect();
    for &k in &queue {
        seen[k] = true;
    }
    while let Some(k) = queue.pop() {
        for &(j, _) in &st.sys.matrix.rows[k] {
            if !seen[j] && !removed[j] {
                seen[j] = true;
                queue.push(j);
            }
        }
    }
    (0..nf)
        .filter(|&k| !seen[k] && !removed[k])
        .map(|k| {
            let v = st.sys.free[k];
            q.at(v) * complex.mass(v)
        })
        .sum()
}

/// Exact energy change of flipping one interior vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Flip {
    pub vertex: usize,
    pub add: bool,
    pub delta: f64,
}

/// Precomputed data for exact flips and ball removals on one state.
pub(crate) struct FlipContext {
    pub zinv: Option<SelectedInverse>,
    pub is_source: Vec<bool>,
    /// `sum_i u_{i,v}^2 / Z_vv` per free vertex.
    pub removal_dirichlet: Vec<f64>,
}

impl FlipContext {
    pub fn new(st: &MaskState, complex: &MetricComplex, tau: f64) -> Self {
        let zinv = st.fac.as_ref().map(SparseLdl::selected_inverse);
        let is_source = sources(complex, st, tau);
        let removal_dirichlet = match (&st.fac, &zinv) {
            (Some(f), Some(z)) => st
                .sys
                .free
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    let u2: f64 = st.field.value(v).iter().map(|x| x * x).sum();
                    u2 / z.diag(f, k)
                })
                .collect(),
            _ => Vec::new(),
        };
        Self {
            zinv,
            is_source,
            removal_dirichlet,
        }
    }
}

/// Exact energy changes of all single interior flips. Additions that would
/// leave the vertex at zero change nothing and are omitted.
pub(crate) fn evaluate_flips(
    complex: &MetricComplex,
    q: &QField,
    st: &MaskState,
    ctx: &FlipContext,
    tau: f64,
    exec: Exec,
) -> Vec<Flip> {
    let mut out = Vec::new();
    if let Some(_f) = &st.fac {
        let cut = cut_bulk(complex, q, st, &ctx.is_source);
        for (k, &v) in st.sys.free.iter().enumerate() {
            let delta = ctx.removal_dirichlet[k] - q.at(v) * complex.mass(v) - cut[k];
            out.push(Flip {
                vertex: v,
                add: false,
                delta,
            });
        }
    }
    let candidates: Vec<usize> = (0..complex.num_vertices())
        .filter(|&w| !complex.is_boundary(w) && !st.mask[w])
        .filter(|&w| {
            complex
                .neighbors(w)
                .iter()
                .any(|&(n, _)| st.field.norm(n) > tau)
        })
        .collect();
    let adds = exec.map(&candidates, |&w| addition_delta(complex, q, st, ctx, w));
    out.extend(adds.into_iter().flatten());
    out
}

fn addition_delta(
    complex: &MetricComplex,
    q: &QField,
    st: &MaskState,
    ctx: &FlipContext,
    w: usize,
) -> Option<Flip> {
    let m = st.field.m();
    let mut r = vec![0.0; m];
    let mut a: Vec<(usize, f64)> = Vec::new();
    let mut aww = 0.0;
    for &(n, k) in complex.neighbors(w) {
        let wt = complex.edges()[k].w;
        aww += wt;
        for (i, ri) in r.iter_mut().enumerate() {
            *ri += wt * st.field.get(n, i);
        }
        if let Some(ln) = st.sys.local(n) {
            a.push((ln, wt));
        }
    }
    let mut ata = 0.0;
    if !a.is_empty() {
        let (f, z) = (st.fac.as_ref()?, ctx.zinv.as_ref()?);
        let mut on_pattern = true;
        'outer: for &(i, wi) in &a {
            for &(j, wj) in &a {
                match z.get(f, i, j) {
                    Some(zij) => ata += wi * wj * zij,
                    None => {
                        on_pattern = false;
                        break 'outer;
                    }
                }
            }
        }
        if !on_pattern {
            let mut rhs = vec![0.0; st.sys.dim()];
            for &(i, wi) in &a {
                rhs[i] = wi;
            }
            let y = f.solve(&rhs);
            ata = a.iter().map(|&(i, wi)| wi * y[i]).sum();
        }
    }
    let s = aww - ata;
    let gain: f64 = r.iter().map(|x| x * x).sum::<f64>() / s;
    let newval = r.iter().map(|x| x * x).sum::<f64>().sqrt() / s;
    if !(newval > st.energy.tau) {
        return None;
    }
    Some(Flip {
        vertex: w,
        add: true,
        delta: q.at(w) * complex.mass(w) - gain,
    })
}

/// Field obtained by flipping a single vertex, via a full re-solve.
pub(crate) fn flipped(
    complex: &MetricComplex,
    q: &QField,
    g: &BoundaryData,
    st: &MaskState,
    vertex: usize,
    tau: f64,
) -> Result<MaskState> {
    let mut mask = st.mask.clone();
    mask[vertex] = !mask[vertex];
    solve_mask(complex, q, g, &mask, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_interval, build_rectangle};

    #[test]
    fn flip_energies_match_resolves() {
        let c = build_rectangle(7, 6, 1.0, 0.8).unwrap();
        let n = c.num_vertices();
        let q = QField::new((0..n).map(|v| 0.5 + (v % 5) as f64 * 0.3).collect()).unwrap();
        let g = BoundaryData::from_fn(&c, 2, |v| {
            let x = c.coords()[v][0];
            vec![(x - 0.3).max(0.0), (0.6 - x).max(0.0) * 0.5]
        })
        .unwrap();
        let mask: Vec<bool> = (0..n).map(|v| (v * 7) % 3 != 0).collect();
        let st = solve_mask(&c, &q, &g, &mask, 1e-12).unwrap();
        let ctx = FlipContext::new(&st, &c, 1e-12);
        let flips = evaluate_flips(&c, &q, &st, &ctx, 1e-12, Exec::Sequential);
        assert!(flips.iter().any(|f| f.add) && flips.iter().any(|f| !f.add));
        for f in flips {
            let re = flipped(&c, &q, &g, &st, f.vertex, 1e-12).unwrap();
            let exact = re.energy.total - st.energy.total;
            assert!(
                (exact - f.delta).abs() < 1e-10 * (1.0 + exact.abs()),
                "{f:?} vs {exact}"
            );
        }
    }

    #[test]
    fn removal_in_a_chain_drops_the_tail() {
        let c = build_interval(11, 1.0).unwrap();
        let q = QField::constant(11, 1.0).unwrap();
        let g = BoundaryData::from_fn(&c, 1, |v| vec![if v == 0 { 1.0 } else { 0.0 }]).unwrap();
        let st = solve_mask(&c, &q, &g, &[true; 11], 1e-12).unwrap();
        let ctx = FlipContext::new(&st, &c, 1e-12);
        let flips = evaluate_flips(&c, &q, &st, &ctx, 1e-12, Exec::Sequential);
        for f in flips.iter().filter(|f| !f.add) {
            let re = flipped(&c, &q, &g, &st, f.vertex, 1e-12).unwrap();
            assert_eq!(re.mask.iter().filter(|b| **b).count(), f.vertex - 1);
            assert!((re.energy.total - st.energy.total - f.delta).abs() < 1e-12);
        }
    }
}
