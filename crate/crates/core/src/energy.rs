//! The discrete Bernoulli functional `J = sum_e w_e |du|^2 + sum_v m_v Q_v [|u_v| > tau]`,
//! its relaxation and the competitor constructions used for certification.

use crate::error::{Error, Result};
use crate::field::{QField, VectorField};
use crate::geometry::{DistanceField, MetricComplex};
use crate::numeric::{adaptive_simpson, csum, CompensatedSum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub dirichlet: f64,
    pub bulk: f64,
    pub total: f64,
    pub tau: f64,
}

impl EnergyReport {
    fn new(dirichlet: f64, bulk: f64, tau: f64) -> Self {
        Self {
            dirichlet,
            bulk,
            total: dirichlet + bulk,
            tau,
        }
    }
}

fn check_shapes(complex: &MetricComplex, u: &VectorField, q: &QField) -> Result<()> {
    let n = complex.num_vertices();
    if u.num_vertices() != n || q.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "complex has {n} vertices, field {}, Q {}",
            u.num_vertices(),
            q.len()
        )));
    }
    Ok(())
}

/// Dirichlet energy summed over components.
pub fn dirichlet_total(complex: &MetricComplex, u: &VectorField) -> f64 {
    csum(complex.edges().iter().map(|e| {
        let d2: f64 = (0..u.m())
            .map(|i| (u.get(e.i, i) - u.get(e.j, i)).powi(2))
            .sum();
        e.w * d2
    }))
}

pub fn energy(
    complex: &MetricComplex,
    u: &VectorField,
    q: &QField,
    tau: f64,
) -> Result<EnergyReport> {
    check_shapes(complex, u, q)?;
    let dirichlet = dirichlet_total(complex, u);
    let bulk = csum(
        (0..complex.num_vertices())
            .filter(|&v| u.norm(v) > tau)
            .map(|v| complex.mass(v) * q.at(v)),
    );
    Ok(EnergyReport::new(dirichlet, bulk, tau))
}

/// `beta_eps(s) = min(s / eps, 1)`.
#[inline]
pub fn beta(s: f64, eps: f64) -> f64 {
    (s / eps).min(1.0)
}

pub fn relaxed_energy(
    complex: &MetricComplex,
    u: &VectorField,
    q: &QField,
    eps: f64,
) -> Result<f64> {
    check_shapes(complex, u, q)?;
    if !(eps > 0.0) {
        return Err(Error::param(format!("relaxation width {eps} must be > 0")));
    }
    let bulk =
        csum((0..complex.num_vertices()).map(|v| complex.mass(v) * q.at(v) * beta(u.norm(v), eps)));
    Ok(dirichlet_total(complex, u) + bulk)
}

/// Change of `J` when `u` is replaced by `v`, where the two fields differ only
/// on `support`. Only edges touching `support` are visited.
pub fn energy_delta(
    complex: &MetricComplex,
    u: &VectorField,
    v: &VectorField,
    q: &QField,
    tau: f64,
    support: &[usize],
) -> f64 {
    let mut in_support = std::collections::HashSet::with_capacity(support.len());
    in_support.extend(support.iter().copied());
    let m = u.m();
    let mut acc = CompensatedSum::new();
    for &s in support {
        for &(n, k) in complex.neighbors(s) {
            // count each edge once
            if in_support.contains(&n) && n < s {
                continue;
            }
            let w = complex.edges()[k].w;
            let mut d = 0.0;
            for i in 0..m {
                d += (v.get(s, i) - v.get(n, i)).powi(2) - (u.get(s, i) - u.get(n, i)).powi(2);
            }
            acc.add(w * d);
        }
        let before = u.norm(s) > tau;
        let after = v.norm(s) > tau;
        if before != after {
            let b = complex.mass(s) * q.at(s);
            acc.add(if after { b } else { -b });
        }
    }
    acc.value()
}

/// `(u_i - delta phi)^+` in component `i`; every other component is unchanged.
pub fn competitor_truncate(
    complex: &MetricComplex,
    u: &VectorField,
    phi: &[f64],
    delta: f64,
    i: usize,
) -> Result<VectorField> {
    if !(delta > 0.0) {
        return Err(Error::param(format!(
            "truncation depth {delta} must be > 0"
        )));
    }
    if i >= u.m() {
        return Err(Error::param(format!("component {i} out of range")));
    }
    if phi.len() != u.num_vertices() {
        return Err(Error::ShapeMismatch("test function length".into()));
    }
    if let Some(v) =
        (0..phi.len()).find(|&v| phi[v] < 0.0 || (complex.is_boundary(v) && phi[v] != 0.0))
    {
        return Err(Error::pre(format!(
            "test function must be >= 0 and vanish on the boundary (vertex {v})"
        )));
    }
    let mut out = u.clone();
    let m = u.m();
    let vals = out.values_mut();
    for v in 0..phi.len() {
        if phi[v] != 0.0 {
            vals[v * m + i] = (vals[v * m + i] - delta * phi[v]).max(0.0);
        }
    }
    Ok(out)
}

/// Comparison function `phi_{N,K}(s) = -int_s^1 (sinh(c t) / c)^{1-N} dt`,
/// `c = sqrt(-K / (N - 1))`, reducing to `-int_s^1 t^{1-N} dt` for `K = 0`.
pub fn phi_nk(s: f64, n: f64, k: f64) -> f64 {
    debug_assert!(s > 0.0);
    if k == 0.0 {
        if (n - 2.0).abs() < 1e-14 {
            s.ln()
        } else {
            (s.powf(2.0 - n) - 1.0) / (2.0 - n)
        }
    } else {
        let c = (-k / (n - 1.0)).sqrt();
        let f = |t: f64| ((c * t).sinh() / c).powf(1.0 - n);
        if s <= 1.0 {
            -adaptive_simpson(&f, s, 1.0, 1e-10)
        } else {
            adaptive_simpson(&f, 1.0, s, 1e-10)
        }
    }
}

/// Scalar profile `psi_theta(t) = (phi(t) - phi(theta))^+ / (phi(1) - phi(theta))`,
/// equal to 1 for `t >= 1`.
pub fn psi_scalar(t: f64, theta: f64, n: f64, k: f64) -> f64 {
    if t <= theta {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let p_theta = phi_nk(theta, n, k);
    let p_one = phi_nk(1.0, n, k);
    ((phi_nk(t, n, k) - p_theta) / (p_one - p_theta)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompetitorProfile {
    pub center: usize,
    pub theta: f64,
    pub r: f64,
    pub n: f64,
    pub k: f64,
    /// `psi_theta(dist / r)` per vertex.
    pub multiplier: Vec<f64>,
    /// `dist < r`.
    pub inside: Vec<bool>,
}

pub fn psi_theta(
    dist: &DistanceField,
    r: f64,
    theta: f64,
    n: f64,
    k: f64,
) -> Result<CompetitorProfile> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::param(format!("theta = {theta} must lie in (0, 1)")));
    }
    if !(r > 0.0) || !(n >= 2.0) || !(k <= 0.0) {
        return Err(Error::param(format!(
            "need r > 0, N >= 2, K <= 0 (got {r}, {n}, {k})"
        )));
    }
    // phi is evaluated once per distinct radius ratio; the normalization once overall
    let p_theta = phi_nk(theta, n, k);
    let p_one = phi_nk(1.0, n, k);
    let multiplier = dist
        .dist
        .iter()
        .map(|&d| {
            let t = d / r;
            if t <= theta {
                0.0
            } else if t >= 1.0 {
                1.0
            } else {
                ((phi_nk(t, n, k) - p_theta) / (p_one - p_theta)).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(CompetitorProfile {
        center: dist.source,
        theta,
        r,
        n,
        k,
        multiplier,
        inside: dist.dist.iter().map(|&d| d < r).collect(),
    })
}

/// `v_i = min(u_i, M psi)` inside the ball, unchanged outside and on boundary
/// vertices (which carry fixed data).
pub fn cutoff_competitor(
    complex: &MetricComplex,
    u: &VectorField,
    profile: &CompetitorProfile,
    big_m: f64,
) -> Result<VectorField> {
    if profile.multiplier.len() != u.num_vertices() {
        return Err(Error::ShapeMismatch("profile length".into()));
    }
    let mut out = u.clone();
    let m = u.m();
    let vals = out.values_mut();
    for v in 0..profile.multiplier.len() {
        if !profile.inside[v] || complex.is_boundary(v) {
            continue;
        }
        let cap = big_m * profile.multiplier[v];
        for x in &mut vals[v * m..(v + 1) * m] {
            *x = x.min(cap);
        }
    }
    Ok(out)
}

/// Vertices where two fields differ.
pub fn changed_vertices(u: &VectorField, v: &VectorField) -> Vec<usize> {
    (0..u.num_vertices())
        .filter(|&x| u.value(x) != v.value(x))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PositivityMask;
    use crate::geometry::{build_interval, build_rectangle, intrinsic_distances};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_field_has_zero_energy() {
        let c = build_rectangle(5, 5, 1.0, 1.0).unwrap();
        let u = VectorField::from_fn(&c, 2, |_| vec![0.0, 0.0]).unwrap();
        let q = QField::constant(25, 3.0).unwrap();
        let e = energy(&c, &u, &q, 1e-12).unwrap();
        assert_eq!((e.dirichlet, e.bulk, e.total), (0.0, 0.0, 0.0));
        assert_eq!(relaxed_energy(&c, &u, &q, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn one_dimensional_kink_energy() {
        // u = (1 - x/a)^+ on [0, 2] with a = 0.5, Q = 4: J -> 1/a + Q a = 4
        let n = 401;
        let c = build_interval(n, 2.0).unwrap();
        let q = QField::constant(n, 4.0).unwrap();
        let u =
            VectorField::from_fn(&c, 1, |v| vec![(1.0 - c.coords()[v][0] / 0.5).max(0.0)]).unwrap();
        let e = energy(&c, &u, &q, 1e-12).unwrap();
        assert_relative_eq!(e.dirichlet, 2.0, max_relative = 1e-12);
        let h = 2.0 / 400.0;
        // discrete bulk: masses of the support vertices
        assert_relative_eq!(e.bulk, 4.0 * (0.5 - h / 2.0), max_relative = 1e-12);
        assert!((e.total - 4.0).abs() < 4.0 * h);
    }

    #[test]
    fn relaxed_saturates() {
        let c = build_interval(5, 1.0).unwrap();
        let q = QField::constant(5, 2.0).unwrap();
        let u = VectorField::from_fn(&c, 1, |v| vec![[1.0, 0.5, 0.0, 0.3, 0.0][v]]).unwrap();
        let exact = energy(&c, &u, &q, 0.0).unwrap().total;
        assert_relative_eq!(
            relaxed_energy(&c, &u, &q, 0.2).unwrap(),
            exact,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            relaxed_energy(&c, &u, &q, 0.1).unwrap(),
            exact,
            max_relative = 1e-14
        );
        assert!(relaxed_energy(&c, &u, &q, 0.0).is_err());
    }

    #[test]
    fn truncation_examples() {
        let c = build_interval(5, 1.0).unwrap();
        let u = VectorField::from_fn(&c, 2, |_| vec![1.0, 1.0]).unwrap();
        let phi: Vec<f64> = (0..5)
            .map(|v| if c.is_boundary(v) { 0.0 } else { 1.0 })
            .collect();
        let v = competitor_truncate(&c, &u, &phi, 2.0, 0).unwrap();
        assert_eq!(v.component(0), vec![1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(v.component(1), u.component(1));
        let zero = vec![0.0; 5];
        assert_eq!(competitor_truncate(&c, &u, &zero, 1.0, 1).unwrap(), u);
        assert!(competitor_truncate(&c, &u, &phi, 0.0, 0).is_err());
        assert!(competitor_truncate(&c, &u, &[1.0; 5], 1.0, 0).is_err());
    }

    #[test]
    fn phi_closed_forms() {
        assert_relative_eq!(
            psi_scalar((-0.5f64).exp(), (-1f64).exp(), 2.0, 0.0),
            0.5,
            epsilon = 1e-14
        );
        assert_relative_eq!(psi_scalar(0.75, 0.5, 3.0, 0.0), 2.0 / 3.0, epsilon = 1e-14);
        assert_eq!(psi_scalar(0.5, 0.5, 3.0, 0.0), 0.0);
        assert_eq!(psi_scalar(1.0, 0.5, 3.0, 0.0), 1.0);
        // negative curvature: closed forms of -int_s^1 (sinh(ct)/c)^{1-N}
        let k = -2.0;
        for &s in &[0.1, 0.3, 0.7, 0.95] {
            // N = 3: c = 1, integrand c^2 / sinh^2(ct)
            let c: f64 = 1.0;
            let coth = |x: f64| 1.0 / x.tanh();
            let exact3 = c * coth(c) - c * coth(c * s);
            assert_relative_eq!(phi_nk(s, 3.0, k), exact3, epsilon = 1e-9);
            // N = 2: c = sqrt(2), integrand c / sinh(ct)
            let c2 = 2f64.sqrt();
            let exact2 = (c2 * s / 2.0).tanh().ln() - (c2 / 2.0).tanh().ln();
            assert_relative_eq!(phi_nk(s, 2.0, k), exact2, epsilon = 1e-9);
        }
    }

    #[test]
    fn cutoff_zeroes_inner_ball() {
        let c = build_rectangle(33, 33, 1.0, 1.0).unwrap();
        let x0 = 16 * 33 + 16;
        let d = intrinsic_distances(&c, x0).unwrap();
        let u = VectorField::from_fn(&c, 1, |v| vec![1.0 + c.coords()[v][0]]).unwrap();
        let prof = psi_theta(&d, 0.25, 0.5, 2.0, 0.0).unwrap();
        let v = cutoff_competitor(&c, &u, &prof, 2.0).unwrap();
        for x in 0..c.num_vertices() {
            if d.dist[x] <= 0.125 {
                assert_eq!(v.get(x, 0), 0.0);
            }
            if d.dist[x] >= 0.25 {
                assert_eq!(v.get(x, 0), u.get(x, 0));
            }
        }
        assert!(psi_theta(&d, 0.25, 1.0, 2.0, 0.0).is_err());
        let z = VectorField::from_fn(&c, 1, |_| vec![0.0]).unwrap();
        assert_eq!(cutoff_competitor(&c, &z, &prof, 1.0).unwrap(), z);
    }

    #[test]
    fn local_delta_matches_full_difference() {
        let c = build_rectangle(9, 9, 1.0, 1.0).unwrap();
        let q = QField::new((0..81).map(|v| 1.0 + v as f64 / 81.0).collect()).unwrap();
        let u = VectorField::from_fn(&c, 2, |v| vec![c.coords()[v][0], (v % 3) as f64]).unwrap();
        let d = intrinsic_distances(&c, 40).unwrap();
        let prof = psi_theta(&d, 0.3, 0.25, 2.0, 0.0).unwrap();
        let v = cutoff_competitor(&c, &u, &prof, 3.0).unwrap();
        let support = changed_vertices(&u, &v);
        let full =
            energy(&c, &v, &q, 1e-12).unwrap().total - energy(&c, &u, &q, 1e-12).unwrap().total;
        assert_relative_eq!(
            energy_delta(&c, &u, &v, &q, 1e-12, &support),
            full,
            epsilon = 1e-12
        );
    }

    proptest! {
        #[test]
        fn competitors_shrink_positivity_set(
            vals in proptest::collection::vec(0.0f64..2.0, 49),
            zeros in proptest::collection::vec(any::<bool>(), 49),
            center in 0usize..49, r in 0.05f64..0.8, theta in 0.05f64..0.95,
            delta in 0.01f64..2.0,
        ) {
            let c = build_rectangle(7, 7, 1.0, 1.0).unwrap();
            let u = VectorField::from_fn(&c, 1, |v| vec![if zeros[v] { 0.0 } else { vals[v] }]).unwrap();
            let before = PositivityMask::of(&u, 0.0).measure(&c);
            let d = intrinsic_distances(&c, center).unwrap();
            let prof = psi_theta(&d, r, theta, 2.0, 0.0).unwrap();
            let big_m = (0..49).map(|v| u.norm(v)).fold(0.0, f64::max);
            let v = cutoff_competitor(&c, &u, &prof, big_m).unwrap();
            prop_assert!(PositivityMask::of(&v, 0.0).measure(&c) <= before + 1e-15);
            let phi: Vec<f64> = (0..49).map(|x| if c.is_boundary(x) { 0.0 } else { prof.multiplier[x] }).collect();
            let t = competitor_truncate(&c, &u, &phi, delta, 0).unwrap();
            prop_assert!(PositivityMask::of(&t, 0.0).measure(&c) <= before + 1e-15);
        }

        #[test]
        fn dirichlet_part_is_additive(a in proptest::collection::vec(0.0f64..1.0, 9), b in proptest::collection::vec(0.0f64..1.0, 9)) {
            let c = build_interval(9, 1.0).unwrap();
            let q = QField::constant(9, 1.0).unwrap();
            let both = VectorField::from_fn(&c, 2, |v| vec![a[v], b[v]]).unwrap();
            let fa = VectorField::from_fn(&c, 1, |v| vec![a[v]]).unwrap();
            let fb = VectorField::from_fn(&c, 1, |v| vec![b[v]]).unwrap();
            let sum = energy(&c, &fa, &q, 0.0).unwrap().dirichlet + energy(&c, &fb, &q, 0.0).unwrap().dirichlet;
            prop_assert!((energy(&c, &both, &q, 0.0).unwrap().dirichlet - sum).abs() <= 1e-12 * (1.0 + sum));
        }

        #[test]
        fn relaxed_increases_to_exact(vals in proptest::collection::vec(0.5f64..2.0, 9), zeros in proptest::collection::vec(any::<bool>(), 9)) {
            let c = build_interval(9, 1.0).unwrap();
            let q = QField::constant(9, 1.5).unwrap();
            let u = VectorField::from_fn(&c, 1, |v| vec![if zeros[v] { 0.0 } else { vals[v] }]).unwrap();
            let exact = energy(&c, &u, &q, 0.0).unwrap().total;
            let mut prev = f64::NEG_INFINITY;
            for eps in [4.0, 2.0, 1.0, 0.5, 0.25] {
                let r = relaxed_energy(&c, &u, &q, eps).unwrap();
                prop_assert!(r >= prev - 1e-14 && r <= exact + 1e-14);
                prev = r;
            }
            prop_assert!((prev - exact).abs() <= 1e-13);
        }
    }
}
