//! The irreducible representations `U_p` of SE(2), the operator-valued
//! Fourier transform, convolution, reconstruction and the group Plancherel
//! formula.
//!
//! `U_p` acts on `L²(S¹, dω/2π)` by
//! `(U_p(g)h)(ω) = exp(ip(x₁cos ω + x₂ sin ω)) h(ω − θ)`.
//! In the basis `e_n(ω) = e^{inω}` its matrix elements
//! `U_p(g)_{mn} = ⟨U_p(g)e_n, e_m⟩` are
//!
//! ```text
//! U_p(g)_{mn} = i^{m−n} e^{−i(m−n)φ} e^{−inθ} J_{m−n}(p r)
//! ```
//!
//! with `(r, φ)` the polar coordinates of the translation. Every operator is
//! truncated to indices `|m|, |n| ≤ N`; accuracy claims are only made on the
//! interior block `|m|, |n| ≤ N − guard`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::fill_bessel_j;
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::quadrature::{RadialGrid, Region, SE2Quadrature, SpatialNode, TailReport};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Plancherel constant `C(d) = 2 / (2^{d/2} Γ(d/2))`.
pub fn plancherel_constant(d: u32) -> f64 {
    assert!(d >= 1, "dimension must be positive");
    // Γ(d/2) through Γ(1) = 1, Γ(1/2) = √π and Γ(x + 1) = xΓ(x)
    let mut gamma = if d % 2 == 0 { 1.0 } else { PI.sqrt() };
    let mut x = if d % 2 == 0 { 1.0 } else { 0.5 };
    while x < d as f64 / 2.0 {
        gamma *= x;
        x += 1.0;
    }
    2.0 / (2f64.powf(d as f64 / 2.0) * gamma)
}

/// Plancherel constant for SE(2).
pub fn c2() -> f64 {
    plancherel_constant(2)
}

/// Truncation of the operators: indices run over `-n..=n`; the outer `guard`
/// indices on each side are excluded from accuracy assertions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandLimit {
    pub n: usize,
    pub guard: usize,
}

impl Default for BandLimit {
    fn default() -> Self {
        Self { n: 16, guard: 6 }
    }
}

impl BandLimit {
    pub fn new(n: usize, guard: usize) -> Result<Self> {
        if n == 0 || guard >= n {
            return Err(Error::InvalidBand { n, guard });
        }
        Ok(Self { n, guard })
    }

    /// Band whose guard is wide enough that `|J_k(z)| < tol` for all
    /// `k > guard` and `z ≤ z_max` (with `z_max = p_max · r_max`).
    pub fn with_bessel_guard(interior: usize, z_max: f64, tol: f64) -> Result<Self> {
        let guard = bessel_guard(z_max, tol);
        Self::new(interior + guard, guard)
    }

    /// `N − guard`.
    pub fn interior(&self) -> usize {
        self.n - self.guard
    }

    /// Matrix dimension `2N + 1`.
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn index(&self, m: i64) -> usize {
        (m + self.n as i64) as usize
    }

    pub fn interior_range(&self) -> std::ops::RangeInclusive<i64> {
        let k = self.interior() as i64;
        -k..=k
    }

    pub fn full_range(&self) -> std::ops::RangeInclusive<i64> {
        let k = self.n as i64;
        -k..=k
    }
}

/// Smallest `g` with `sup_{z ≤ z_max} |J_k(z)| < tol` for every `k > g`.
///
/// For `k > z_max` the Bessel functions are increasing on `[0, z_max]`, so
/// the supremum is attained at `z_max`; below that the bound is never met.
pub fn bessel_guard(z_max: f64, tol: f64) -> usize {
    let mut orders = vec![0.0; (z_max.ceil() as usize + 200).max(16)];
    fill_bessel_j(z_max, &mut orders);
    let start = z_max.ceil() as usize;
    (start..orders.len())
        .find(|&g| orders[g + 1..].iter().all(|v| v.abs() < tol))
        .unwrap_or(orders.len())
}

/// A band-truncated operator at radial frequency `p`, entry `(m, n)` for
/// `m, n ∈ [−N, N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralOperator {
    pub p: f64,
    pub band: BandLimit,
    pub entries: DMatrix<Complex64>,
}

impl SpectralOperator {
    pub fn zeros(p: f64, band: BandLimit) -> Self {
        Self {
            p,
            band,
            entries: DMatrix::zeros(band.dim(), band.dim()),
        }
    }

    /// From row-major entries.
    pub fn from_row_major(p: f64, band: BandLimit, values: &[Complex64]) -> Self {
        Self {
            p,
            band,
            entries: DMatrix::from_row_slice(band.dim(), band.dim(), values),
        }
    }

    pub fn get(&self, m: i64, n: i64) -> Complex64 {
        self.entries[(self.band.index(m), self.band.index(n))]
    }

    pub fn set(&mut self, m: i64, n: i64, v: Complex64) {
        let (i, j) = (self.band.index(m), self.band.index(n));
        self.entries[(i, j)] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Hilbert-Schmidt norm over the full band.
    pub fn hs_norm(&self) -> f64 {
        self.entries.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hilbert-Schmidt norm over the interior block.
    pub fn interior_hs_norm(&self) -> f64 {
        self.interior_hs_norm_sqr().sqrt()
    }

    pub fn interior_hs_norm_sqr(&self) -> f64 {
        let mut s = 0.0;
        for m in self.band.interior_range() {
            for n in self.band.interior_range() {
                s += self.get(m, n).norm_sqr();
            }
        }
        s
    }

    /// `Σ_{m,n interior} A_{mn} B_{nm}`.
    pub fn interior_trace_product(&self, other: &SpectralOperator) -> Complex64 {
        let mut s = ZERO;
        for m in self.band.interior_range() {
            for n in self.band.interior_range() {
                s += self.get(m, n) * other.get(n, m);
            }
        }
        s
    }

    /// Largest entry modulus on the interior block.
    pub fn interior_max_abs(&self) -> f64 {
        let mut s: f64 = 0.0;
        for m in self.band.interior_range() {
            for n in self.band.interior_range() {
                s = s.max(self.get(m, n).norm());
            }
        }
        s
    }

    /// Operator 2-norm (largest singular value) of the full truncated matrix.
    pub fn operator_norm(&self) -> f64 {
        self.entries
            .clone()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> SpectralOperator {
        Self {
            p: self.p,
            band: self.band,
            entries: self.entries.adjoint(),
        }
    }

    /// Truncated matrix product `self · other`.
    pub fn mul(&self, other: &SpectralOperator) -> SpectralOperator {
        Self {
            p: self.p,
            band: self.band,
            entries: &self.entries * &other.entries,
        }
    }

    pub fn sub(&self, other: &SpectralOperator) -> SpectralOperator {
        Self {
            p: self.p,
            band: self.band,
            entries: &self.entries - &other.entries,
        }
    }

    pub fn add_assign(&mut self, other: &SpectralOperator) {
        self.entries += &other.entries;
    }

    pub fn scale(&self, s: Complex64) -> SpectralOperator {
        Self {
            p: self.p,
            band: self.band,
            entries: &self.entries * s,
        }
    }

    /// `max |(self − I)_{mn}|` over the interior block.
    pub fn interior_identity_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for m in self.band.interior_range() {
            for n in self.band.interior_range() {
                let id = if m == n { 1.0 } else { 0.0 };
                d = d.max((self.get(m, n) - id).norm());
            }
        }
        d
    }
}

/// `i^k` for integer `k`.
pub fn i_pow(k: i64) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Matrix elements of a pure translation, `t_k = i^k e^{−ikφ} J_k(p r)` for
/// `k ∈ [−max_offset, max_offset]`, stored at index `k + max_offset`.
///
/// `U_p((x, 0))_{mn} = t_{m−n}` and `U_p(g)_{mn} = t_{m−n} e^{−inθ}`.
pub fn translation_harmonics(p: f64, x: [f64; 2], max_offset: usize, out: &mut Vec<Complex64>) {
    let mut scratch = vec![0.0; max_offset + 1];
    translation_harmonics_with(p, x, max_offset, out, &mut scratch);
}

pub(crate) fn translation_harmonics_with(
    p: f64,
    x: [f64; 2],
    max_offset: usize,
    out: &mut Vec<Complex64>,
    bessel: &mut Vec<f64>,
) {
    let r = x[0].hypot(x[1]);
    let phi = x[1].atan2(x[0]);
    bessel.resize(max_offset + 1, 0.0);
    fill_bessel_j(p * r, bessel);
    out.clear();
    out.resize(2 * max_offset + 1, ZERO);
    let k0 = max_offset as i64;
    // e^{-iφ} powers by recurrence
    let step = Complex64::from_polar(1.0, -phi);
    let mut rot = Complex64::new(1.0, 0.0);
    for k in 0..=max_offset {
        let j = bessel[k];
        let ik = i_pow(k as i64);
        // t_k = i^k e^{-ikφ} J_k ; t_{-k} = i^k e^{ikφ} J_k
        out[(k0 + k as i64) as usize] = ik * rot * j;
        out[(k0 - k as i64) as usize] = ik * rot.conj() * j;
        rot *= step;
    }
}

/// The truncated matrix of `U_p(g)`.
pub fn irrep_matrix(p: f64, g: &GroupElement, band: BandLimit) -> Result<SpectralOperator> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::NonPositiveFrequency(p));
    }
    let big_n = band.n as i64;
    let mut t = Vec::new();
    translation_harmonics(p, g.translation_part(), 2 * band.n, &mut t);
    let off = 2 * big_n;
    let mut op = SpectralOperator::zeros(p, band);
    for n in -big_n..=big_n {
        let rot = Complex64::from_polar(1.0, -(n as f64) * g.theta());
        for m in -big_n..=big_n {
            op.set(m, n, t[(m - n + off) as usize] * rot);
        }
    }
    Ok(op)
}

/// Angular Fourier modes of a function sampled on an SE(2) tensor rule:
/// `F_m(x) = Σ_θ w_θ f(x, θ) e^{imθ}` for each spatial node and `|m| ≤ N`.
///
/// Everything the Fourier transform needs from `f`; once built, `f̂(p)` can
/// be formed at any number of frequencies without re-evaluating `f`.
#[derive(Clone, Debug)]
pub struct AngularModes {
    band: BandLimit,
    spatial: Vec<SpatialNode>,
    /// row-major: node-major, mode-minor, mode index `m + N`
    modes: Vec<Complex64>,
}

impl AngularModes {
    pub fn sample<F>(f: F, q: &SE2Quadrature, band: BandLimit) -> Result<Self>
    where
        F: Fn(&GroupElement) -> Complex64,
    {
        let angular = q.angular_nodes();
        Self::build(q, band, |_, sn, j| {
            let g = GroupElement::new(sn.x[0], sn.x[1], angular[j].0);
            let v = f(&g);
            if v.re.is_finite() && v.im.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteAtNode {
                    node: g,
                    value: v.to_string(),
                })
            }
        })
    }

    /// Modes from values already sampled at `q.nodes()`, in that order.
    pub fn from_values(q: &SE2Quadrature, band: BandLimit, values: &[Complex64]) -> Result<Self> {
        if values.len() != q.len() {
            return Err(Error::IndexMismatch(format!(
                "{} samples for a rule with {} nodes",
                values.len(),
                q.len()
            )));
        }
        let nth = q.angular_nodes().len();
        Self::build(q, band, |i, sn, j| {
            let v = values[i * nth + j];
            if v.re.is_finite() && v.im.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteAtNode {
                    node: GroupElement::new(sn.x[0], sn.x[1], q.angular_nodes()[j].0),
                    value: v.to_string(),
                })
            }
        })
    }

    fn build<V>(q: &SE2Quadrature, band: BandLimit, value: V) -> Result<Self>
    where
        V: Fn(usize, &SpatialNode, usize) -> Result<Complex64>,
    {
        let dim = band.dim();
        let big_n = band.n as i64;
        let angular = q.angular_nodes();
        // e^{imθ} table per angular node
        let phases: Vec<Complex64> = angular
            .iter()
            .flat_map(|&(th, w)| {
                (-big_n..=big_n).map(move |m| Complex64::from_polar(w, m as f64 * th))
            })
            .collect();
        let mut spatial = Vec::new();
        let mut modes = Vec::new();
        let mut row = vec![ZERO; dim];
        for (i, sn) in q.spatial_nodes().iter().enumerate() {
            row.iter_mut().for_each(|v| *v = ZERO);
            let mut any = false;
            for j in 0..angular.len() {
                let v = value(i, sn, j)?;
                if v == ZERO {
                    continue;
                }
                any = true;
                let ph = &phases[j * dim..(j + 1) * dim];
                for (r, e) in row.iter_mut().zip(ph) {
                    *r += v * e;
                }
            }
            if any {
                spatial.push(*sn);
                modes.extend_from_slice(&row);
            }
        }
        Ok(Self {
            band,
            spatial,
            modes,
        })
    }

    pub fn band(&self) -> BandLimit {
        self.band
    }

    /// `f̂(p) = ∫ f(g) U_p(g)* dg`, entry `(m, n) = Σ_x w_x F_m(x) conj(t_{n−m}(x))`.
    pub fn transform(&self, p: f64) -> Result<SpectralOperator> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::NonPositiveFrequency(p));
        }
        let dim = self.band.dim();
        let n = self.band.n;
        let mut acc = vec![ZERO; dim * dim];
        let mut t = Vec::new();
        let mut scratch = Vec::new();
        for (node, row) in self.spatial.iter().zip(self.modes.chunks_exact(dim)) {
            translation_harmonics_with(p, node.x, 2 * n, &mut t, &mut scratch);
            for (mi, &fm) in row.iter().enumerate() {
                if fm == ZERO {
                    continue;
                }
                let c = fm * node.weight;
                // n − m + 2N ranges over [2N − mi, 2N − mi + 2N]
                let base = 2 * n - mi;
                let out = &mut acc[mi * dim..(mi + 1) * dim];
                for (o, tk) in out.iter_mut().zip(&t[base..base + dim]) {
                    *o += c * tk.conj();
                }
            }
        }
        Ok(SpectralOperator::from_row_major(p, self.band, &acc))
    }

    /// Transform at every node of `grid`, plus the tail audit at `p_max`.
    pub fn spectrum(&self, grid: &RadialGrid, tail_tol: f64) -> Result<SpectrumTable> {
        let ops = grid
            .nodes()
            .iter()
            .map(|&p| self.transform(p))
            .collect::<Result<Vec<_>>>()?;
        let at_max = self.transform(grid.p_max())?.hs_norm();
        let norms: Vec<f64> = ops.iter().map(|o| o.hs_norm()).collect();
        Ok(SpectrumTable {
            grid: grid.clone(),
            tail: TailReport::new(&norms, at_max, tail_tol),
            ops,
        })
    }
}

fn check_coverage(q: &SE2Quadrature, support: &Region) -> Result<()> {
    if q.region().covers(support) {
        Ok(())
    } else {
        Err(Error::NotCovered(format!(
            "quadrature region {:?} does not contain support {:?}",
            q.region(),
            support
        )))
    }
}

/// `f̂(p) = ∫ f(g) U_p(g)* dg` by quadrature over `q`, which must cover the support.
pub fn fourier_transform<F>(
    f: F,
    support: &Region,
    p: f64,
    band: BandLimit,
    q: &SE2Quadrature,
) -> Result<SpectralOperator>
where
    F: Fn(&GroupElement) -> Complex64,
{
    check_coverage(q, support)?;
    AngularModes::sample(f, q, band)?.transform(p)
}

/// `f̂` at every node of a radial grid.
#[derive(Clone, Debug)]
pub struct SpectrumTable {
    pub grid: RadialGrid,
    pub ops: Vec<SpectralOperator>,
    pub tail: TailReport,
}

impl SpectrumTable {
    pub fn compute<F>(
        f: F,
        support: &Region,
        grid: &RadialGrid,
        band: BandLimit,
        q: &SE2Quadrature,
        tail_tol: f64,
    ) -> Result<Self>
    where
        F: Fn(&GroupElement) -> Complex64,
    {
        check_coverage(q, support)?;
        AngularModes::sample(f, q, band)?.spectrum(grid, tail_tol)
    }

    /// Pointwise map over the operators, keeping grid and tail audit.
    pub fn map<M>(&self, f: M) -> SpectrumTable
    where
        M: Fn(&SpectralOperator) -> SpectralOperator,
    {
        SpectrumTable {
            grid: self.grid.clone(),
            ops: self.ops.iter().map(f).collect(),
            tail: self.tail.clone(),
        }
    }

    /// `p ↦ g(p) f(p)` operator products, e.g. `f̂₂(p) f̂₁(p)`.
    pub fn product(&self, right: &SpectrumTable) -> SpectrumTable {
        SpectrumTable {
            grid: self.grid.clone(),
            ops: self.ops.iter().zip(&right.ops).map(|(a, b)| a.mul(b)).collect(),
            tail: if self.tail.ok { right.tail.clone() } else { self.tail.clone() },
        }
    }
}

/// The convolution `(f₁ ⋆ f₂)(h) = ∫ f₁(g) f₂(g⁻¹ ∘ h) dg`, evaluated lazily
/// with `q1` covering the support of `f₁`.
pub fn convolve_group<F1, F2>(
    f1: F1,
    f2: F2,
    q1: &SE2Quadrature,
) -> impl Fn(&GroupElement) -> Complex64 + Send + Sync
where
    F1: Fn(&GroupElement) -> Complex64,
    F2: Fn(&GroupElement) -> Complex64 + Send + Sync,
{
    let samples: Vec<(GroupElement, Complex64)> = q1
        .nodes()
        .filter_map(|(g, w)| {
            let v = f1(&g);
            (v != ZERO).then(|| (g.inverse(), v * w))
        })
        .collect();
    move |h: &GroupElement| {
        samples
            .iter()
            .fold(ZERO, |acc, (g_inv, wv)| acc + wv * f2(&g_inv.compose(h)))
    }
}

/// `tr[F U_p(g)]` over the interior block.
pub fn interior_trace_with_irrep(op: &SpectralOperator, g: &GroupElement) -> Complex64 {
    let band = op.band;
    let k = band.interior();
    let mut t = Vec::new();
    translation_harmonics(op.p, g.translation_part(), 2 * k, &mut t);
    let off = 2 * k as i64;
    let mut s = ZERO;
    for m in band.interior_range() {
        let rot = Complex64::from_polar(1.0, -(m as f64) * g.theta());
        for n in band.interior_range() {
            // U_{nm} = t_{n−m} e^{−imθ}
            s += op.get(m, n) * t[(n - m + off) as usize] * rot;
        }
    }
    s
}

/// A reconstructed value together with any tail warning.
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub value: Complex64,
    pub warning: Option<String>,
}

/// `f(g) = C(2) ∫ tr[f̂(p) U_p(g)] p dp`.
pub fn reconstruct(spectrum: &SpectrumTable, g: &GroupElement) -> Reconstruction {
    let values: Vec<Complex64> = spectrum
        .ops
        .iter()
        .map(|op| interior_trace_with_irrep(op, g))
        .collect();
    Reconstruction {
        value: spectrum.grid.sum(&values) * c2(),
        warning: spectrum.tail.warning(),
    }
}

/// Both sides of `∫ |f|² dg = C(2) ∫ ‖f̂(p)‖²_HS p dp`, computed independently.
pub fn plancherel_group<F>(
    f: F,
    support: &Region,
    grid: &RadialGrid,
    band: BandLimit,
    q: &SE2Quadrature,
) -> Result<(f64, f64)>
where
    F: Fn(&GroupElement) -> Complex64,
{
    check_coverage(q, support)?;
    let modes = AngularModes::sample(&f, q, band)?;
    let lhs = crate::quadrature::integrate_se2(|g| Complex64::new(f(g).norm_sqr(), 0.0), q)?.re;
    let mut rhs = 0.0;
    for (&p, &w) in grid.nodes().iter().zip(grid.weights()) {
        rhs += w * modes.transform(p)?.interior_hs_norm_sqr();
    }
    Ok((lhs, c2() * rhs))
}
