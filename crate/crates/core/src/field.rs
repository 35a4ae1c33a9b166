//! Nonnegative vector fields, the weight `Q`, positivity masks and the
//! `W^{1,2}` + mask distance between fields.

use crate::error::{Error, Result};
use crate::geometry::MetricComplex;
use crate::numeric::{csum, CompensatedSum};
use crate::DEFAULT_TAU;
use std::fmt::Write as _;
use std::path::Path;

/// Prescribed values on the boundary vertices of a complex.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    m: usize,
    ids: Vec<usize>,
    values: Vec<f64>,
}

impl BoundaryData {
    /// Evaluates `g` on every boundary vertex of `complex`.
    pub fn from_fn<F>(complex: &MetricComplex, m: usize, g: F) -> Result<Self>
    where
        F: Fn(usize) -> Vec<f64>,
    {
        if m == 0 {
            return Err(Error::param("field needs at least one component"));
        }
        let ids = complex.boundary_vertices();
        let mut values = Vec::with_capacity(ids.len() * m);
        for &v in &ids {
            let gv = g(v);
            if gv.len() != m {
                return Err(Error::ShapeMismatch(format!(
                    "boundary value at {v} has {} components, expected {m}",
                    gv.len()
                )));
            }
            if let Some(x) = gv.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
                return Err(Error::param(format!(
                    "boundary value {x} at vertex {v} is not >= 0"
                )));
            }
            values.extend(gv);
        }
        Ok(Self { m, ids, values })
    }

    pub fn zero(complex: &MetricComplex, m: usize) -> Result<Self> {
        Self::from_fn(complex, m, |_| vec![0.0; m])
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// Iterates `(vertex, values)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.ids.iter().copied().zip(self.values.chunks(self.m))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|x| *x == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    m: usize,
    n: usize,
    values: Vec<f64>,
    boundary: BoundaryData,
}

impl VectorField {
    /// Zero in the interior, `g` on the boundary.
    pub fn from_boundary(complex: &MetricComplex, g: BoundaryData) -> Self {
        let n = complex.num_vertices();
        let mut values = vec![0.0; n * g.m];
        for (v, gv) in g.iter() {
            values[v * g.m..(v + 1) * g.m].copy_from_slice(gv);
        }
        Self {
            m: g.m,
            n,
            values,
            boundary: g,
        }
    }

    /// Builds a field from per-component vertex vectors. Boundary entries are
    /// overwritten by `g`.
    pub fn from_components(
        complex: &MetricComplex,
        comps: &[Vec<f64>],
        g: BoundaryData,
    ) -> Result<Self> {
        let n = complex.num_vertices();
        if comps.len() != g.m {
            return Err(Error::ShapeMismatch(format!(
                "{} components given, boundary data has {}",
                comps.len(),
                g.m
            )));
        }
        let mut f = Self::from_boundary(complex, g);
        for (i, c) in comps.iter().enumerate() {
            if c.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "component {i} has length {} != {n}",
                    c.len()
                )));
            }
            for v in 0..n {
                if complex.is_boundary(v) {
                    continue;
                }
                if !(c[v] >= 0.0 && c[v].is_finite()) {
                    return Err(Error::param(format!(
                        "component {i} value {} at vertex {v} is not >= 0",
                        c[v]
                    )));
                }
                f.values[v * f.m + i] = c[v];
            }
        }
        Ok(f)
    }

    /// Builds a field from a per-vertex closure on the whole complex; boundary
    /// data is read off the boundary vertices.
    pub fn from_fn<F>(complex: &MetricComplex, m: usize, f: F) -> Result<Self>
    where
        F: Fn(usize) -> Vec<f64>,
    {
        let g = BoundaryData::from_fn(complex, m, &f)?;
        let comps: Vec<Vec<f64>> = {
            let vals: Vec<Vec<f64>> = (0..complex.num_vertices()).map(&f).collect();
            (0..m)
                .map(|i| vals.iter().map(|x| x[i]).collect())
                .collect()
        };
        Self::from_components(complex, &comps, g)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn boundary_data(&self) -> &BoundaryData {
        &self.boundary
    }

    #[inline]
    pub fn value(&self, v: usize) -> &[f64] {
        &self.values[v * self.m..(v + 1) * self.m]
    }

    #[inline]
    pub fn get(&self, v: usize, i: usize) -> f64 {
        self.values[v * self.m + i]
    }

    /// Euclidean norm `|u_v|` of the m-tuple.
    #[inline]
    pub fn norm(&self, v: usize) -> f64 {
        self.value(v).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn norms(&self) -> Vec<f64> {
        (0..self.n).map(|v| self.norm(v)).collect()
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|v| self.values[v * self.m + i]).collect()
    }

    pub fn components(&self) -> Vec<Vec<f64>> {
        (0..self.m).map(|i| self.component(i)).collect()
    }

    /// Sets an interior value; boundary vertices are left untouched.
    pub fn set_interior(
        &mut self,
        complex: &MetricComplex,
        v: usize,
        i: usize,
        x: f64,
    ) -> Result<()> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::param(format!("value {x} is not >= 0")));
        }
        if complex.is_boundary(v) {
            return Err(Error::pre(format!("vertex {v} carries boundary data")));
        }
        self.values[v * self.m + i] = x;
        Ok(())
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn check_compatible(&self, other: &VectorField) -> Result<()> {
        if self.m != other.m || self.n != other.n {
            return Err(Error::ShapeMismatch(format!(
                "fields ({} x {}) and ({} x {})",
                self.n, self.m, other.n, other.m
            )));
        }
        Ok(())
    }
}

/// Positive weight `Q` with cached bounds `0 < q_min <= Q_v <= q_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct QField {
    values: Vec<f64>,
    q_min: f64,
    q_max: f64,
}

impl QField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("Q field is empty"));
        }
        let q_min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let q_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(q_min > 0.0) || !q_max.is_finite() {
            return Err(Error::param(format!(
                "Q must satisfy 0 < Q_min <= Q_max < inf, got [{q_min}, {q_max}]"
            )));
        }
        Ok(Self {
            values,
            q_min,
            q_max,
        })
    }

    pub fn constant(n: usize, q: f64) -> Result<Self> {
        Self::new(vec![q; n])
    }

    #[inline]
    pub fn at(&self, v: usize) -> f64 {
        self.values[v]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivityMask {
    pub mask: Vec<bool>,
    pub tau: f64,
}

impl PositivityMask {
    /// Mask `|u_v| > tau` without modifying the field.
    pub fn of(u: &VectorField, tau: f64) -> Self {
        Self {
            mask: (0..u.num_vertices()).map(|v| u.norm(v) > tau).collect(),
            tau,
        }
    }

    pub fn from_vec(mask: Vec<bool>, tau: f64) -> Self {
        Self { mask, tau }
    }

    pub fn get(&self, v: usize) -> bool {
        self.mask[v]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|b| **b).count()
    }

    /// `mu({mask})`.
    pub fn measure(&self, complex: &MetricComplex) -> f64 {
        csum(
            (0..self.mask.len())
                .filter(|&v| self.mask[v])
                .map(|v| complex.mass(v)),
        )
    }

    pub fn vertices(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&v| self.mask[v]).collect()
    }
}

/// Snap-then-mask: values with `|u_v| <= tau` are set to exact zero and the
/// mask `|u_v| > tau` is returned alongside the snapped field.
pub fn positivity_mask(u: &VectorField, tau: f64) -> Result<(VectorField, PositivityMask)> {
    if !(tau >= 0.0) {
        return Err(Error::param(format!("threshold tau = {tau} must be >= 0")));
    }
    let mut out = u.clone();
    let mask = PositivityMask::of(u, tau);
    let m = u.m;
    for v in 0..u.n {
        if !mask.mask[v] {
            out.values[v * m..(v + 1) * m]
                .iter_mut()
                .for_each(|x| *x = 0.0);
        }
    }
    let bm = out.boundary.m;
    for (k, &v) in out.boundary.ids.clone().iter().enumerate() {
        if !mask.mask[v] {
            out.boundary.values[k * bm..(k + 1) * bm]
                .iter_mut()
                .for_each(|x| *x = 0.0);
        }
    }
    Ok((out, mask))
}

/// Discrete `W^{1,2}` distance plus the `L^1` distance of the positivity masks
/// (both masks taken at the default threshold).
pub fn field_dist(u: &VectorField, w: &VectorField, complex: &MetricComplex) -> Result<f64> {
    u.check_compatible(w)?;
    if u.n != complex.num_vertices() {
        return Err(Error::ShapeMismatch(
            "field does not live on this complex".into(),
        ));
    }
    let m = u.m;
    let l2 = csum((0..u.n).map(|v| {
        let d2: f64 = (0..m).map(|i| (u.get(v, i) - w.get(v, i)).powi(2)).sum();
        complex.mass(v) * d2
    }));
    let grad = csum(complex.edges().iter().map(|e| {
        let d2: f64 = (0..m)
            .map(|i| {
                let a = u.get(e.i, i) - w.get(e.i, i);
                let b = u.get(e.j, i) - w.get(e.j, i);
                (a - b).powi(2)
            })
            .sum();
        e.w * d2
    }));
    let mu = PositivityMask::of(u, DEFAULT_TAU);
    let mw = PositivityMask::of(w, DEFAULT_TAU);
    let mask_term = csum(
        (0..u.n)
            .filter(|&v| mu.mask[v] != mw.mask[v])
            .map(|v| complex.mass(v)),
    );
    Ok((l2 + grad).sqrt() + mask_term)
}

/// [`field_dist`] for fields that agree outside `support`; only edges and
/// vertices touching `support` are visited.
pub(crate) fn field_dist_local(
    u: &VectorField,
    w: &VectorField,
    complex: &MetricComplex,
    support: &[usize],
) -> f64 {
    let m = u.m;
    let diff = |v: usize, i: usize| u.get(v, i) - w.get(v, i);
    let mut inside = vec![false; u.n];
    for &s in support {
        inside[s] = true;
    }
    let mut acc = CompensatedSum::new();
    let mut mask_term = CompensatedSum::new();
    for &s in support {
        acc.add(complex.mass(s) * (0..m).map(|i| diff(s, i).powi(2)).sum::<f64>());
        for &(n, k) in complex.neighbors(s) {
            if inside[n] && n < s {
                continue;
            }
            let d2: f64 = (0..m).map(|i| (diff(s, i) - diff(n, i)).powi(2)).sum();
            acc.add(complex.edges()[k].w * d2);
        }
        if (u.norm(s) > DEFAULT_TAU) != (w.norm(s) > DEFAULT_TAU) {
            mask_term.add(complex.mass(s));
        }
    }
    acc.value().sqrt() + mask_term.value()
}

/// `sup_{v in set} |u_v|`; the empty set is an error.
pub fn sup_on(u: &VectorField, set: &[usize]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet("sup over an empty vertex set".into()));
    }
    Ok(set.iter().map(|&v| u.norm(v)).fold(0.0, f64::max))
}

/// Keeps the values on `set` and zeroes everything else, including boundary
/// data outside `set`.
pub fn restrict(u: &VectorField, set: &[usize]) -> Result<VectorField> {
    if set.is_empty() {
        return Err(Error::EmptySet("restriction to an empty vertex set".into()));
    }
    let mut keep = vec![false; u.n];
    for &v in set {
        if v >= u.n {
            return Err(Error::param(format!("vertex {v} out of range")));
        }
        keep[v] = true;
    }
    let mut out = u.clone();
    let m = u.m;
    for v in 0..u.n {
        if !keep[v] {
            out.values[v * m..(v + 1) * m]
                .iter_mut()
                .for_each(|x| *x = 0.0);
        }
    }
    for (k, &v) in u.boundary.ids.iter().enumerate() {
        if !keep[v] {
            out.boundary.values[k * m..(k + 1) * m]
                .iter_mut()
                .for_each(|x| *x = 0.0);
        }
    }
    Ok(out)
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with header `vertex_id,u_1..u_m,mask`.
pub fn field_to_csv(u: &VectorField, tau: f64) -> String {
    let mut s = String::from("vertex_id");
    for i in 1..=u.m {
        let _ = write!(s, ",u_{i}");
    }
    s.push_str(",mask\n");
    for v in 0..u.n {
        let _ = write!(s, "{v}");
        for i in 0..u.m {
            let _ = write!(s, ",{}", fmt_f64(u.get(v, i)));
        }
        let _ = writeln!(s, ",{}", u8::from(u.norm(v) > tau));
    }
    s
}

pub fn write_field_csv(u: &VectorField, tau: f64, path: &Path) -> Result<()> {
    std::fs::write(path, field_to_csv(u, tau))?;
    Ok(())
}

/// Parses a field CSV written by [`field_to_csv`]; boundary data is taken
/// from the boundary rows.
pub fn field_from_csv(complex: &MetricComplex, text: &str) -> Result<VectorField> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty field file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "vertex_id" || *cols.last().unwrap() != "mask" {
        return Err(Error::Parse(format!(
            "line 1: unexpected header '{header}'"
        )));
    }
    let m = cols.len() - 2;
    let n = complex.num_vertices();
    let mut vals = vec![vec![f64::NAN; m]; n];
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != m + 2 {
            return Err(Error::Parse(format!(
                "line {}: expected {} columns",
                ln + 1,
                m + 2
            )));
        }
        let v: usize = parts[0]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad vertex id '{}'", ln + 1, parts[0])))?;
        if v >= n {
            return Err(Error::Parse(format!(
                "line {}: vertex {v} out of range",
                ln + 1
            )));
        }
        for i in 0..m {
            vals[v][i] = parts[1 + i].parse().map_err(|_| {
                Error::Parse(format!("line {}: bad value '{}'", ln + 1, parts[1 + i]))
            })?;
        }
    }
    if let Some(v) = vals.iter().position(|x| x[0].is_nan()) {
        return Err(Error::Parse(format!("vertex {v} missing from field file")));
    }
    VectorField::from_fn(complex, m, |v| vals[v].clone())
}
