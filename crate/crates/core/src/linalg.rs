//! Sparse symmetric systems arising from Dirichlet problems: reduced-system
//! assembly, Jacobi-preconditioned conjugate gradients, and a sparse direct
//! LDL^T factorization with selected inversion.

use crate::error::{Error, Result};
use crate::geometry::MetricComplex;

/// Symmetric matrix stored as a diagonal plus full off-diagonal row lists.
#[derive(Debug, Clone)]
pub struct SymSparse {
    pub diag: Vec<f64>,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SymSparse {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.dim() {
            let mut s = self.diag[i] * x[i];
            for &(j, a) in &self.rows[i] {
                s += a * x[j];
            }
            y[i] = s;
        }
    }
}

const FIXED: usize = usize::MAX;

/// The graph Laplacian restricted to a free vertex set; all other vertices
/// are treated as Dirichlet data.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub free: Vec<usize>,
    local: Vec<usize>,
    pub matrix: SymSparse,
}

impl ReducedSystem {
    pub fn new(complex: &MetricComplex, is_free: &[bool]) -> Self {
        let n = complex.num_vertices();
        let mut local = vec![FIXED; n];
        let mut free = Vec::new();
        for v in 0..n {
            if is_free[v] {
                local[v] = free.len();
                free.push(v);
            }
        }
        let mut diag = Vec::with_capacity(free.len());
        let mut rows = Vec::with_capacity(free.len());
        for &v in &free {
            let mut d = 0.0;
            let mut row = Vec::new();
            for &(nb, k) in complex.neighbors(v) {
                let w = complex.edges()[k].w;
                d += w;
                if local[nb] != FIXED {
                    row.push((local[nb], -w));
                }
            }
            diag.push(d);
            rows.push(row);
        }
        Self {
            free,
            local,
            matrix: SymSparse { diag, rows },
        }
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    /// Local index of a free vertex.
    pub fn local(&self, v: usize) -> Option<usize> {
        (self.local[v] != FIXED).then_some(self.local[v])
    }

    /// Right-hand side `sum_{fixed nbr} w u_nbr` for the given full-length values.
    pub fn rhs(&self, complex: &MetricComplex, values: &[f64]) -> Vec<f64> {
        self.free
            .iter()
            .map(|&v| {
                complex
                    .neighbors(v)
                    .iter()
                    .filter(|&&(nb, _)| self.local[nb] == FIXED)
                    .map(|&(nb, k)| complex.edges()[k].w * values[nb])
                    .sum()
            })
            .collect()
    }

    pub fn gather(&self, values: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&v| values[v]).collect()
    }

    pub fn scatter(&self, x: &[f64], values: &mut [f64]) {
        for (k, &v) in self.free.iter().enumerate() {
            values[v] = x[k];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients; stops when
/// `||b - A x|| <= tol * ||b||`.
pub fn conjugate_gradient(
    a: &SymSparse,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgStats)> {
    let n = a.dim();
    let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if n == 0 || bnorm == 0.0 {
        // unique solution of A x = 0 on a nonsingular system
        return Ok((
            vec![0.0; n],
            CgStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let mut ax = vec![0.0; n];
    a.mul(&x, &mut ax);
    let mut r: Vec<f64> = (0..n).map(|i| b[i] - ax[i]).collect();
    let inv_d: Vec<f64> = a.diag.iter().map(|d| 1.0 / d).collect();
    let mut z: Vec<f64> = (0..n).map(|i| r[i] * inv_d[i]).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let target = tol * bnorm;
    let mut rnorm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    for it in 0..max_iter {
        if rnorm <= target {
            return Ok((
                x,
                CgStats {
                    iterations: it,
                    residual: rnorm / bnorm,
                },
            ));
        }
        a.mul(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::pre(
                "reduced Dirichlet matrix is not positive definite",
            ));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        for i in 0..n {
            z[i] = r[i] * inv_d[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // recompute the true residual before giving up
    a.mul(&x, &mut ax);
    let res = (0..n).map(|i| (b[i] - ax[i]).powi(2)).sum::<f64>().sqrt() / bnorm;
    if res <= tol {
        return Ok((
            x,
            CgStats {
                iterations: max_iter,
                residual: res,
            },
        ));
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: res,
    })
}

/// `P A P^T = L D L^T` with a fill-reducing (approximate minimum degree)
/// ordering; `L` is stored by columns with sorted row indices.
#[derive(Debug, Clone)]
pub struct SparseLdl {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    iperm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

/// Entries of `A^{-1}` on the sparsity pattern of the factor.
#[derive(Debug, Clone)]
pub struct SelectedInverse {
    z: Vec<f64>,
    zd: Vec<f64>,
}

fn amd_order(a: &SymSparse) -> Result<Vec<usize>> {
    let n = a.dim();
    let mut ap = Vec::with_capacity(n + 1);
    let mut ai = Vec::new();
    ap.push(0);
    for i in 0..n {
        let mut col: Vec<usize> = a.rows[i].iter().map(|&(j, _)| j).collect();
        col.push(i);
        col.sort_unstable();
        col.dedup();
        ai.extend(col);
        ap.push(ai.len());
    }
    let (p, _, _) = amd::order(n, &ap, &ai, &amd::Control::default())
        .map_err(|s| Error::pre(format!("ordering failed: {s:?}")))?;
    Ok(p)
}

impl SparseLdl {
    pub fn factor(a: &SymSparse) -> Result<Self> {
        let n = a.dim();
        let perm = if n > 0 { amd_order(a)? } else { Vec::new() };
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        // upper triangle of the permuted matrix, by columns
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for k in 0..n {
            let old = perm[k];
            cols[k].push((k, a.diag[old]));
            for &(c, v) in &a.rows[old] {
                let i = iperm[c];
                if i < k {
                    cols[k].push((i, v));
                }
            }
        }
        // elimination tree and column counts
        const NONE: usize = usize::MAX;
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &(i0, _) in &cols[k] {
                let mut i = i0;
                while i < k && flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }
        let mut li = vec![0; lp[n]];
        let mut lx = vec![0.0; lp[n]];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0; n];
        lnz.iter_mut().for_each(|x| *x = 0);
        let scale = a.diag.iter().copied().fold(0.0, f64::max);
        // up-looking numeric factorization, one row of L at a time
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for &(i0, v) in &cols[k] {
                y[i0] += v;
                let mut len = 0;
                let mut i = i0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            let mut dk = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let p2 = lp[i] + lnz[i];
                for p in lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let lki = yi / d[i];
                dk -= lki * yi;
                li[p2] = k;
                lx[p2] = lki;
                lnz[i] += 1;
            }
            if !(dk > 1e-14 * scale) {
                return Err(Error::pre(
                    "Dirichlet system is singular: some free component touches no fixed vertex",
                ));
            }
            d[k] = dk;
        }
        Ok(Self {
            perm,
            iperm,
            lp,
            li,
            lx,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Number of stored off-diagonal entries of `L`.
    pub fn factor_size(&self) -> usize {
        self.lx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.lp[j]..self.lp[j + 1] {
                    x[self.li[p]] -= self.lx[p] * xj;
                }
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut s = 0.0;
            for p in self.lp[j]..self.lp[j + 1] {
                s += self.lx[p] * x[self.li[p]];
            }
            x[j] -= s;
        }
        let mut out = vec![0.0; n];
        for (p, &o) in self.perm.iter().enumerate() {
            out[o] = x[p];
        }
        out
    }

    /// Position of `L_{row, col}` (`row > col`, permuted indices).
    #[inline]
    fn index(&self, row: usize, col: usize) -> Option<usize> {
        let rows = &self.li[self.lp[col]..self.lp[col + 1]];
        rows.binary_search(&row).ok().map(|k| self.lp[col] + k)
    }

    /// Takahashi recurrences for the entries of `A^{-1}` on the pattern of
    /// `L`. The column patterns of a filled graph are cliques, so every entry
    /// a column needs is already on the pattern.
    pub fn selected_inverse(&self) -> SelectedInverse {
        let n = self.dim();
        let mut z = vec![0.0; self.lx.len()];
        let mut zd = vec![0.0; n];
        let mut pos = vec![usize::MAX; n];
        let mut acc: Vec<f64> = Vec::new();
        for j in (0..n).rev() {
            let (b, e) = (self.lp[j], self.lp[j + 1]);
            let rows = &self.li[b..e];
            let lcol = &self.lx[b..e];
            for (t, &r) in rows.iter().enumerate() {
                pos[r] = t;
            }
            acc.clear();
            acc.resize(rows.len(), 0.0);
            // acc_t = sum_k Z_{rows[t], k} L_{k j} over k in the column pattern
            for (tc, &c) in rows.iter().enumerate() {
                acc[tc] += zd[c] * lcol[tc];
                for p in self.lp[c]..self.lp[c + 1] {
                    let r = self.li[p];
                    let tr = pos[r];
                    if tr != usize::MAX {
                        acc[tc] += z[p] * lcol[tr];
                        acc[tr] += z[p] * lcol[tc];
                    }
                }
            }
            let mut s = 0.0;
            for t in 0..rows.len() {
                z[b + t] = -acc[t];
                s += lcol[t] * z[b + t];
            }
            zd[j] = 1.0 / self.d[j] - s;
            for &r in rows {
                pos[r] = usize::MAX;
            }
        }
        SelectedInverse { z, zd }
    }
}

impl SelectedInverse {
    /// `(A^{-1})_{ij}` in original local indices if it lies on the pattern.
    pub fn get(&self, f: &SparseLdl, i: usize, j: usize) -> Option<f64> {
        let (p, q) = (f.iperm[i], f.iperm[j]);
        if p == q {
            return Some(self.zd[p]);
        }
        let (r, c) = if p > q { (p, q) } else { (q, p) };
        f.index(r, c).map(|k| self.z[k])
    }

    pub fn diag(&self, f: &SparseLdl, i: usize) -> f64 {
        self.zd[f.iperm[i]]
    }
}
