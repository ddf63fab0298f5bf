//! Orthonormal bases of `L²(Γ\SE(2), μ)`, the operators
//! `Q_K^φ(p) = ∫_K φ(Γg) U_p(g) dg`, and Fourier coefficients of coset
//! functions computed three ways: by direct quadrature on Ω, by the trace
//! formula `C(2) Σ_γ ∫ tr[f̂(p) Q_{γΩ}^{φ̄}(p)] p dp`, and by the same
//! formula written as an explicit matrix-element double sum.
//!
//! Basis functions are built from the characters
//! `χ_{k,n}(g) = c e^{2πi⟨k, B⁻¹x⟩} e^{inθ}`, `c = μ(Γ\SE(2))^{-1/2}`.
//! For a nontrivial point group each character is averaged over the
//! rotations of Γ and the surviving averages are orthonormalised.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::crystal::{CosetFunction, CosetQuadrature, CrystalElement, CrystalGroup};
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::quadrature::{
    build_se2_quadrature, gauss_legendre, Orders, RadialGrid, Region, SE2Quadrature,
    DEFAULT_TAIL_TOL,
};
use crate::spectra::{c2, translation_harmonics_with, AngularModes, BandLimit, SpectralOperator};
use crate::testfn::GroupFn;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Rank tolerance for the orthonormalisation of averaged characters.
pub const RANK_TOL: f64 = 1e-10;

/// Index of a character `χ_{k,n}`; also used to label basis elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BasisIndex {
    pub k: [i64; 2],
    pub n: i64,
}

impl BasisIndex {
    pub fn new(k1: i64, k2: i64, n: i64) -> Self {
        Self { k: [k1, k2], n }
    }

    /// `max(|k₁|, |k₂|, |n|)`.
    pub fn shell(&self) -> i64 {
        self.k[0].abs().max(self.k[1].abs()).max(self.n.abs())
    }
}

/// One orthonormal basis function: a combination of characters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisElement {
    pub index: BasisIndex,
    pub terms: Vec<(BasisIndex, Complex64)>,
}

/// An orthonormal family `(ψ_ℓ)` for one crystal group.
#[derive(Clone, Debug)]
pub struct Basis {
    group: CrystalGroup,
    k_max: usize,
    n_max: usize,
    scale: f64,
    elements: Vec<BasisElement>,
}

type Sparse = BTreeMap<BasisIndex, Complex64>;

fn sparse_dot(a: &Sparse, b: &Sparse) -> Complex64 {
    // Σ a_r conj(b_r)
    a.iter()
        .filter_map(|(r, x)| b.get(r).map(|y| x * y.conj()))
        .sum()
}

fn sparse_norm(a: &Sparse) -> f64 {
    a.values().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn transpose_apply(m: [[i64; 2]; 2], k: [i64; 2]) -> [i64; 2] {
    [m[0][0] * k[0] + m[1][0] * k[1], m[0][1] * k[0] + m[1][1] * k[1]]
}

/// All basis functions with labels `‖k‖_∞ ≤ k_max`, `|n| ≤ n_max`, in
/// lexicographic label order.
pub fn enumerate_basis(group: &CrystalGroup, k_max: usize, n_max: usize) -> Basis {
    let nu = group.point_order();
    let (km, nm) = (k_max as i64, n_max as i64);
    // candidates grouped by point-group orbit; distinct orbits are orthogonal
    let mut orbits: BTreeMap<([i64; 2], i64), Vec<Sparse>> = BTreeMap::new();
    let mut elements = Vec::new();
    for k1 in -km..=km {
        for k2 in -km..=km {
            for n in -nm..=nm {
                let mut v = Sparse::new();
                let mut key = [i64::MAX, i64::MAX];
                for j in 0..nu {
                    let kj = transpose_apply(group.point_matrix(j), [k1, k2]);
                    key = key.min(kj);
                    let phase = Complex64::from_polar(1.0 / nu as f64, n as f64 * j as f64 * TAU / nu as f64);
                    *v.entry(BasisIndex { k: kj, n }).or_default() += phase;
                }
                v.retain(|_, c| c.norm() > 1e-15);
                let prior = orbits.entry((key, n)).or_default();
                // two passes of Gram-Schmidt against earlier members of the orbit
                for _ in 0..2 {
                    for u in prior.iter() {
                        let proj = sparse_dot(&v, u);
                        for (r, c) in u {
                            *v.entry(*r).or_default() -= proj * c;
                        }
                    }
                }
                let norm = sparse_norm(&v);
                if norm <= RANK_TOL {
                    continue;
                }
                v.retain(|_, c| c.norm() > 1e-15 * norm);
                v.values_mut().for_each(|c| *c /= norm);
                prior.push(v.clone());
                elements.push(BasisElement {
                    index: BasisIndex::new(k1, k2, n),
                    terms: v.into_iter().collect(),
                });
            }
        }
    }
    Basis {
        group: group.clone(),
        k_max,
        n_max,
        scale: group.mu_volume().powf(-0.5),
        elements,
    }
}

impl Basis {
    pub fn group(&self) -> &CrystalGroup {
        &self.group
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// The character normalisation `c = μ(Γ\SE(2))^{-1/2}`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn indices(&self) -> Vec<BasisIndex> {
        self.elements.iter().map(|e| e.index).collect()
    }

    pub fn position(&self, index: &BasisIndex) -> Option<usize> {
        self.elements.binary_search_by(|e| e.index.cmp(index)).ok()
    }

    /// Restrict to the elements whose labels satisfy `keep`.
    pub fn filtered<P: Fn(&BasisIndex) -> bool>(&self, keep: P) -> Basis {
        Basis {
            elements: self.elements.iter().filter(|e| keep(&e.index)).cloned().collect(),
            ..self.clone()
        }
    }

    /// Every character appearing in some element, sorted.
    pub fn characters(&self) -> Vec<BasisIndex> {
        let set: BTreeSet<BasisIndex> = self
            .elements
            .iter()
            .flat_map(|e| e.terms.iter().map(|t| t.0))
            .collect();
        set.into_iter().collect()
    }

    pub fn character(&self, r: &BasisIndex, g: &GroupElement) -> Complex64 {
        let s = self.group.to_cell(g.translation_part());
        let phase = TAU * (r.k[0] as f64 * s[0] + r.k[1] as f64 * s[1]) + r.n as f64 * g.theta();
        Complex64::from_polar(self.scale, phase)
    }

    /// `ψ_ℓ(g)` by its closed form; Γ-invariant by construction.
    pub fn eval(&self, element: usize, g: &GroupElement) -> Complex64 {
        self.elements[element]
            .terms
            .iter()
            .map(|(r, a)| a * self.character(r, g))
            .sum()
    }

    pub fn coset_function(&self, element: usize) -> CosetFunction {
        let me = self.clone();
        CosetFunction::from_invariant(&self.group, move |g| me.eval(element, g))
    }

    /// Upper bound `c Σ|a_r|` for `‖ψ_ℓ‖_∞`; equal to `c` for a single character.
    pub fn sup_norm(&self, element: usize) -> f64 {
        self.scale * self.elements[element].terms.iter().map(|t| t.1.norm()).sum::<f64>()
    }

    /// `Σ_ℓ coeff_ℓ ψ_ℓ(g)`.
    pub fn synthesize(&self, coefficients: &[Complex64], g: &GroupElement) -> Complex64 {
        coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != ZERO)
            .map(|(i, c)| c * self.eval(i, g))
            .sum()
    }
}

/// `⟨F, χ_r⟩` on a coset grid for every character of a basis, computed by
/// a separable transform of the samples.
pub fn character_products(values: &[Complex64], q: &CosetQuadrature, basis: &Basis) -> Vec<Complex64> {
    let chars = basis.characters();
    if chars.is_empty() {
        return Vec::new();
    }
    let [ns, nt, nth] = q.orders();
    let range = |f: &dyn Fn(&BasisIndex) -> i64| {
        let lo = chars.iter().map(f).min().unwrap();
        let hi = chars.iter().map(f).max().unwrap();
        (lo, (hi - lo + 1) as usize)
    };
    let (k1_lo, k1_len) = range(&|r| r.k[0]);
    let (k2_lo, k2_len) = range(&|r| r.k[1]);
    let (n_lo, n_len) = range(&|r| r.n);
    // [node][freq] = e^{-i freq x_node}, x in [0, 2π) for θ and in [0, 1) for cell coordinates
    let phases = |len: usize, lo: i64, count: usize, angle: bool| -> Vec<Complex64> {
        (0..count)
            .flat_map(|i| {
                let x = if angle {
                    TAU * i as f64 / count as f64
                } else {
                    TAU * (i as f64 + 0.5) / count as f64
                };
                (0..len).map(move |f| Complex64::from_polar(1.0, -((lo + f as i64) as f64) * x))
            })
            .collect()
    };
    let e_th = phases(n_len, n_lo, nth, true);
    let e_t = phases(k2_len, k2_lo, nt, false);
    let e_s = phases(k1_len, k1_lo, ns, false);
    // θ stage
    let mut a = vec![ZERO; ns * nt * n_len];
    for st in 0..ns * nt {
        let row = &values[st * nth..(st + 1) * nth];
        let out = &mut a[st * n_len..(st + 1) * n_len];
        for (l, v) in row.iter().enumerate() {
            let ph = &e_th[l * n_len..(l + 1) * n_len];
            for (o, e) in out.iter_mut().zip(ph) {
                *o += v * e;
            }
        }
    }
    // t stage: b[s][k2][n]
    let mut b = vec![ZERO; ns * k2_len * n_len];
    for s in 0..ns {
        for t in 0..nt {
            let src = &a[(s * nt + t) * n_len..(s * nt + t + 1) * n_len];
            for k2 in 0..k2_len {
                let e = e_t[t * k2_len + k2];
                let dst = &mut b[(s * k2_len + k2) * n_len..(s * k2_len + k2 + 1) * n_len];
                for (d, v) in dst.iter_mut().zip(src) {
                    *d += e * v;
                }
            }
        }
    }
    let w = q.weight() * basis.scale();
    chars
        .iter()
        .map(|r| {
            let k1 = (r.k[0] - k1_lo) as usize;
            let k2 = (r.k[1] - k2_lo) as usize;
            let n = (r.n - n_lo) as usize;
            (0..ns)
                .map(|s| e_s[s * k1_len + k1] * b[(s * k2_len + k2) * n_len + n])
                .sum::<Complex64>()
                * w
        })
        .collect()
}

/// `⟨F, ψ_ℓ⟩` for every basis element from per-character products.
pub fn combine_characters(basis: &Basis, products: &[Complex64]) -> Vec<Complex64> {
    let chars = basis.characters();
    basis
        .elements()
        .iter()
        .map(|e| {
            e.terms
                .iter()
                .map(|(r, a)| {
                    let i = chars.binary_search(r).expect("character of basis");
                    a.conj() * products[i]
                })
                .sum()
        })
        .collect()
}

/// `⟨f̃, ψ_ℓ⟩` for every basis element, by quadrature on the coset grid.
pub fn direct_coefficients(f: &CosetFunction, basis: &Basis, q: &CosetQuadrature) -> Vec<Complex64> {
    let values = q.sample(f);
    combine_characters(basis, &character_products(&values, q, basis))
}

/// Numerical settings of the spectral coefficient pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSettings {
    pub band: BandLimit,
    pub p_max: f64,
    pub radial_nodes: usize,
    pub tail_tol: f64,
    /// Rule for `f̂` over the bounding box of the support.
    pub transform_orders: Orders,
    /// Rule for `Q` over each translate `γΩ` (two cell directions, then θ).
    pub domain_orders: Orders,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        Self {
            band: BandLimit::default(),
            p_max: 12.0,
            radial_nodes: 64,
            tail_tol: DEFAULT_TAIL_TOL,
            transform_orders: Orders::new(48, 48, 64),
            domain_orders: Orders::new(40, 40, 32),
        }
    }
}

impl SpectralSettings {
    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.p_max, self.radial_nodes)
    }
}

/// `Q_K^φ(p) = ∫_K φ(Γg) U_p(g) dg` by quadrature over `q`, restricted to `region`.
///
/// Computed as the adjoint of the Fourier transform of `conj(φ)·1_K`.
pub fn q_operator(
    phi: &CosetFunction,
    region: &Region,
    p: f64,
    band: BandLimit,
    q: &SE2Quadrature,
) -> Result<SpectralOperator> {
    if !q.region().covers(region) {
        return Err(Error::NotCovered(format!(
            "quadrature region {:?} does not contain {region:?}",
            q.region()
        )));
    }
    let masked = |g: &GroupElement| {
        if region.contains(g) {
            phi.eval(g).conj()
        } else {
            ZERO
        }
    };
    Ok(AngularModes::sample(masked, q, band)?.transform(p)?.adjoint())
}

/// Per-translate data of the separable `Q` engine.
struct DomainRule {
    quadrature: SE2Quadrature,
    s_nodes: Vec<f64>,
    t_nodes: Vec<f64>,
    /// `M_jᵀ k` for each spatial frequency of the engine.
    k_image: Vec<[i64; 2]>,
    /// `[n][m] = Σ_θ w_θ e^{−inθ} e^{−imθ}` (Haar factor included).
    angular: Vec<Vec<Complex64>>,
}

/// Fast evaluation of `Σ_γ ∫ tr[A(p) Q_{γΩ}^{ψ̄_ℓ}(p)] p dp` for every basis
/// element at once.
///
/// For a character `χ = χ_{k,n}`, `Q_{γΩ}^{χ̄}(p)_{ab} = V_{a−b} S_b` with
/// `V_j = ∫ c e^{−2πi⟨k,B⁻¹x⟩} t_j(x) dx` over the translated cell and
/// `S_b = ∫ e^{−inθ} e^{−ibθ} dθ` over its angle sector, so each operator is
/// a Toeplitz matrix times a diagonal. The spatial integrals are separable
/// in cell coordinates and are shared by all characters.
pub struct TraceEngine<'b> {
    basis: &'b Basis,
    band: BandLimit,
    characters: Vec<BasisIndex>,
    ks: Vec<[i64; 2]>,
    ns: Vec<i64>,
    /// `(k index, n index)` of each character
    char_slots: Vec<(usize, usize)>,
    gammas: Vec<CrystalElement>,
    domains: Vec<DomainRule>,
}

/// Result of the matrix-element form of a coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixForm {
    /// Value over the interior block.
    pub value: Complex64,
    /// Partial sums over `|m|, |n| ≤ r` for `r = 0..=N`.
    pub partial_sums: Vec<Complex64>,
}

impl MatrixForm {
    /// `|S_N − S_{N_int}|`, the part of the double sum lying in the guard band.
    pub fn guard_tail(&self, band: BandLimit) -> f64 {
        (self.partial_sums[band.n] - self.partial_sums[band.interior()]).norm()
    }
}

impl<'b> TraceEngine<'b> {
    pub fn new(
        basis: &'b Basis,
        gammas: &[CrystalElement],
        band: BandLimit,
        domain_orders: Orders,
    ) -> Result<Self> {
        let group = basis.group();
        let characters = basis.characters();
        let ks: Vec<[i64; 2]> = characters.iter().map(|r| r.k).collect::<BTreeSet<_>>().into_iter().collect();
        let ns: Vec<i64> = characters.iter().map(|r| r.n).collect::<BTreeSet<_>>().into_iter().collect();
        let char_slots = characters
            .iter()
            .map(|r| (ks.binary_search(&r.k).unwrap(), ns.binary_search(&r.n).unwrap()))
            .collect();
        let s_nodes: Vec<f64> = gauss_legendre(domain_orders.x1, 0.0, 1.0)?.iter().map(|p| p.0).collect();
        let t_nodes: Vec<f64> = gauss_legendre(domain_orders.x2, 0.0, 1.0)?.iter().map(|p| p.0).collect();
        let big_n = band.n as i64;
        let mut domains = Vec::with_capacity(gammas.len());
        for gamma in gammas {
            let region = group.translated_domain(gamma);
            let quadrature = build_se2_quadrature(&region, domain_orders)?;
            let m = group.point_matrix(gamma.j);
            let k_image = ks.iter().map(|k| transpose_apply(m, *k)).collect();
            let angular = ns
                .iter()
                .map(|&n| {
                    (-big_n..=big_n)
                        .map(|b| {
                            quadrature
                                .angular_nodes()
                                .iter()
                                .map(|&(th, w)| Complex64::from_polar(w, -((n + b) as f64) * th))
                                .sum()
                        })
                        .collect()
                })
                .collect();
            domains.push(DomainRule {
                quadrature,
                s_nodes: s_nodes.clone(),
                t_nodes: t_nodes.clone(),
                k_image,
                angular,
            });
        }
        Ok(Self {
            basis,
            band,
            characters,
            ks,
            ns,
            char_slots,
            gammas: gammas.to_vec(),
            domains,
        })
    }

    pub fn gammas(&self) -> &[CrystalElement] {
        &self.gammas
    }

    /// `V[k][j + reach]` for `|j| ≤ reach`, one translate at one frequency.
    fn spatial(&self, d: &DomainRule, p: f64, reach: usize) -> Vec<Vec<Complex64>> {
        let two_n = reach;
        let width = 2 * two_n + 1;
        let (ns, nt) = (d.s_nodes.len(), d.t_nodes.len());
        let mut t = Vec::new();
        let mut scratch = Vec::new();
        // weighted translation harmonics per node, [a][b][j]
        let mut table = vec![ZERO; ns * nt * width];
        for (idx, node) in d.quadrature.spatial_nodes().iter().enumerate() {
            translation_harmonics_with(p, node.x, two_n, &mut t, &mut scratch);
            let out = &mut table[idx * width..(idx + 1) * width];
            for (o, v) in out.iter_mut().zip(&t) {
                *o = v * node.weight;
            }
        }
        let k2_lo = d.k_image.iter().map(|k| k[1]).min().unwrap_or(0);
        let k2_hi = d.k_image.iter().map(|k| k[1]).max().unwrap_or(0);
        let k2_len = (k2_hi - k2_lo + 1) as usize;
        // contract b: stage[a][k2][j]
        let mut stage = vec![ZERO; ns * k2_len * width];
        for a in 0..ns {
            for (b, &tb) in d.t_nodes.iter().enumerate() {
                let src = &table[(a * nt + b) * width..(a * nt + b + 1) * width];
                for k2 in 0..k2_len {
                    let e = Complex64::from_polar(1.0, -TAU * (k2_lo + k2 as i64) as f64 * tb);
                    let dst = &mut stage[(a * k2_len + k2) * width..(a * k2_len + k2 + 1) * width];
                    for (o, v) in dst.iter_mut().zip(src) {
                        *o += e * v;
                    }
                }
            }
        }
        let c = self.basis.scale();
        d.k_image
            .iter()
            .map(|k| {
                let k2 = (k[1] - k2_lo) as usize;
                let mut out = vec![ZERO; width];
                for (a, &sa) in d.s_nodes.iter().enumerate() {
                    let e = Complex64::from_polar(c, -TAU * k[0] as f64 * sa);
                    let src = &stage[(a * k2_len + k2) * width..(a * k2_len + k2 + 1) * width];
                    for (o, v) in out.iter_mut().zip(src) {
                        *o += e * v;
                    }
                }
                out
            })
            .collect()
    }

    fn check_spectra(&self, spectra: &[SpectralOperator], grid: &RadialGrid) -> Result<()> {
        if spectra.len() != grid.len() {
            return Err(Error::IndexMismatch(format!(
                "{} spectral operators for {} radial nodes",
                spectra.len(),
                grid.len()
            )));
        }
        if let Some(op) = spectra.iter().find(|op| op.band != self.band) {
            return Err(Error::IndexMismatch(format!(
                "operator band {:?} differs from engine band {:?}",
                op.band, self.band
            )));
        }
        Ok(())
    }

    /// `C(2) Σ_γ ∫ tr[A(p) Q_{γΩ}^{ψ̄_ℓ}(p)] p dp` for every basis element,
    /// with `A(p)` given at the grid nodes. Traces run over the interior block.
    pub fn coefficients(&self, spectra: &[SpectralOperator], grid: &RadialGrid) -> Result<Vec<Complex64>> {
        self.check_spectra(spectra, grid)?;
        let band = self.band;
        let big_n = band.n as i64;
        let two_int = 2 * band.interior() as i64;
        let int: Vec<i64> = band.interior_range().collect();
        let nk = self.ks.len();
        // acc[k][n] = Σ_p w_p Σ_γ Σ_m S_n[m] W[m][k]
        let mut acc = vec![ZERO; nk * self.ns.len()];
        let mut w_mk = vec![ZERO; int.len() * nk];
        for (op, &wp) in spectra.iter().zip(grid.weights()) {
            for d in &self.domains {
                let v = self.spatial(d, op.p, two_int as usize);
                // W[m][k] = Σ_n A_{mn} V_k[n − m]
                for (mi, &m) in int.iter().enumerate() {
                    for (ki, vk) in v.iter().enumerate() {
                        let mut s = ZERO;
                        for &n in &int {
                            s += op.get(m, n) * vk[(n - m + two_int) as usize];
                        }
                        w_mk[mi * nk + ki] = s;
                    }
                }
                for (ni, sn) in d.angular.iter().enumerate() {
                    for ki in 0..nk {
                        let mut s = ZERO;
                        for (mi, &m) in int.iter().enumerate() {
                            s += sn[(m + big_n) as usize] * w_mk[mi * nk + ki];
                        }
                        acc[ki * self.ns.len() + ni] += s * wp;
                    }
                }
            }
        }
        let per_char: Vec<Complex64> = self
            .char_slots
            .iter()
            .map(|&(ki, ni)| acc[ki * self.ns.len() + ni] * c2())
            .collect();
        Ok(self
            .basis
            .elements()
            .iter()
            .map(|e| {
                e.terms
                    .iter()
                    .map(|(r, a)| {
                        let i = self.characters.binary_search(r).unwrap();
                        a.conj() * per_char[i]
                    })
                    .sum()
            })
            .collect())
    }

    /// The materialised operator `Q_{γΩ}^{ψ̄_ℓ}(p)` over the full band.
    pub fn q_matrix(&self, element: usize, gamma_index: usize, p: f64) -> SpectralOperator {
        let v = self.spatial(&self.domains[gamma_index], p, 2 * self.band.n);
        self.assemble(element, &self.domains[gamma_index], &v, p)
    }

    fn assemble(&self, element: usize, d: &DomainRule, v: &[Vec<Complex64>], p: f64) -> SpectralOperator {
        let big_n = self.band.n as i64;
        let mut q = SpectralOperator::zeros(p, self.band);
        for (r, a) in &self.basis.elements()[element].terms {
            let ci = self.characters.binary_search(r).unwrap();
            let (ki, ni) = self.char_slots[ci];
            let ac = a.conj();
            for m in -big_n..=big_n {
                let s = d.angular[ni][(m + big_n) as usize] * ac;
                for n in -big_n..=big_n {
                    let e = q.get(n, m) + v[ki][(n - m + 2 * big_n) as usize] * s;
                    q.set(n, m, e);
                }
            }
        }
        q
    }

    /// The coefficient of each selected element as the explicit double sum
    /// `C(2) Σ_γ Σ_n Σ_m ∫ A(p)_{mn} Q(p)_{nm} p dp`, with partial sums.
    pub fn matrix_forms(
        &self,
        spectra: &[SpectralOperator],
        grid: &RadialGrid,
        elements: &[usize],
    ) -> Result<Vec<MatrixForm>> {
        self.check_spectra(spectra, grid)?;
        let big_n = self.band.n;
        let mut sums = vec![vec![ZERO; big_n + 1]; elements.len()];
        for (op, &wp) in spectra.iter().zip(grid.weights()) {
            for d in &self.domains {
                let v = self.spatial(d, op.p, 2 * self.band.n);
                for (slot, &e) in elements.iter().enumerate() {
                    let q = self.assemble(e, d, &v, op.p);
                    // shell r collects the terms with max(|m|, |n|) = r
                    let mut shell = vec![ZERO; big_n + 1];
                    for n in -(big_n as i64)..=big_n as i64 {
                        for m in -(big_n as i64)..=big_n as i64 {
                            let r = n.unsigned_abs().max(m.unsigned_abs()) as usize;
                            shell[r] += op.get(m, n) * q.get(n, m);
                        }
                    }
                    for (s, v) in sums[slot].iter_mut().zip(shell) {
                        *s += v * wp;
                    }
                }
            }
        }
        Ok(sums
            .into_iter()
            .map(|shells| {
                let mut partial = Vec::with_capacity(shells.len());
                let mut run = ZERO;
                for s in shells {
                    run += s * c2();
                    partial.push(run);
                }
                MatrixForm {
                    value: partial[self.band.interior()],
                    partial_sums: partial,
                }
            })
            .collect())
    }
}

/// Spectral coefficients of a periodized function together with the tail audit.
#[derive(Clone, Debug)]
pub struct TraceCoefficients {
    pub values: Vec<Complex64>,
    pub gammas: Vec<CrystalElement>,
    pub warning: Option<String>,
}

/// `⟨f̃, ψ_ℓ⟩` for every basis element through the trace formula.
pub fn coefficient_trace(
    f: &GroupFn,
    support: &crate::quadrature::Disk,
    basis: &Basis,
    settings: &SpectralSettings,
) -> Result<TraceCoefficients> {
    let grid = settings.grid()?;
    let q = build_se2_quadrature(&support.bounding_region(), settings.transform_orders)?;
    let spectrum = crate::spectra::SpectrumTable::compute(
        |g| f(g),
        &support.bounding_region(),
        &grid,
        settings.band,
        &q,
        settings.tail_tol,
    )?;
    let gammas = basis.group().contributing(support);
    let engine = TraceEngine::new(basis, &gammas, settings.band, settings.domain_orders)?;
    Ok(TraceCoefficients {
        values: engine.coefficients(&spectrum.ops, &grid)?,
        gammas,
        warning: spectrum.tail.warning(),
    })
}

/// `Σ_ℓ coeff(ℓ) ψ_ℓ(Γg)`; the table must carry exactly the basis labels.
pub fn series_reconstruct(table: &CoefficientTable, basis: &Basis, g: &GroupElement) -> Result<Complex64> {
    let coefficients = table.aligned(basis)?;
    Ok(basis.synthesize(&coefficients, g))
}

/// `Σ_ℓ |coeff(ℓ)| ‖ψ_ℓ‖_∞` over the table.
pub fn ae_diagnostic(table: &CoefficientTable, basis: &Basis) -> Result<f64> {
    Ok(ae_partial_sums(table, basis)?.last().map(|v| v.1).unwrap_or(0.0))
}

/// Cumulative `Σ |coeff| ‖ψ‖_∞` over shells `max(|k₁|, |k₂|, |n|) ≤ r`.
pub fn ae_partial_sums(table: &CoefficientTable, basis: &Basis) -> Result<Vec<(i64, f64)>> {
    let coefficients = table.aligned(basis)?;
    let top = basis.indices().iter().map(|i| i.shell()).max().unwrap_or(0);
    let mut shells = vec![0.0; top as usize + 1];
    for (i, c) in coefficients.iter().enumerate() {
        shells[basis.elements()[i].index.shell() as usize] += c.norm() * basis.sup_norm(i);
    }
    let mut run = 0.0;
    Ok(shells
        .into_iter()
        .enumerate()
        .map(|(r, v)| {
            run += v;
            (r as i64, run)
        })
        .collect())
}

/// Metadata written next to a coefficient table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub crystal: CrystalGroup,
    pub k_max: usize,
    pub n_max: usize,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coset_orders: Option<[usize; 3]>,
    #[serde(default)]
    pub generator: serde_json::Value,
}

/// Map `ℓ ↦ ⟨f̃, ψ_ℓ⟩`, in label order.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTable {
    pub entries: Vec<(BasisIndex, Complex64)>,
    pub metadata: Option<TableMetadata>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    k1: i64,
    k2: i64,
    n: i64,
    re: String,
    im: String,
}

/// Shortest round-trip decimal with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl CoefficientTable {
    pub fn new(basis: &Basis, values: &[Complex64]) -> Self {
        Self {
            entries: basis.indices().into_iter().zip(values.iter().copied()).collect(),
            metadata: None,
        }
    }

    pub fn with_metadata(mut self, metadata: TableMetadata) -> Self {
        self.metadata = Some(metadata);
        self
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.entries.iter().map(|e| e.1).collect()
    }

    pub fn get(&self, index: &BasisIndex) -> Option<Complex64> {
        self.entries.iter().find(|e| e.0 == *index).map(|e| e.1)
    }

    /// Coefficients in basis order; errors unless the label sets coincide.
    pub fn aligned(&self, basis: &Basis) -> Result<Vec<Complex64>> {
        if self.entries.len() != basis.len() {
            return Err(Error::IndexMismatch(format!(
                "table has {} entries, basis has {}",
                self.entries.len(),
                basis.len()
            )));
        }
        self.entries
            .iter()
            .zip(basis.elements())
            .map(|((i, c), e)| {
                if *i == e.index {
                    Ok(*c)
                } else {
                    Err(Error::IndexMismatch(format!(
                        "table label {i:?} where basis has {:?}",
                        e.index
                    )))
                }
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (i, c) in &self.entries {
            w.serialize(CsvRow {
                k1: i.k[0],
                k2: i.k[1],
                n: i.n,
                re: format_f64(c.re),
                im: format_f64(c.im),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut entries = Vec::new();
        for row in r.deserialize() {
            let row: CsvRow = row?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Table(format!("bad number {s:?}: {e}")))
            };
            entries.push((
                BasisIndex::new(row.k1, row.k2, row.n),
                Complex64::new(parse(&row.re)?, parse(&row.im)?),
            ));
        }
        Ok(Self {
            entries,
            metadata: None,
        })
    }

    /// Write `<stem>.csv` and, when metadata is present, `<stem>.json`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let csv_file = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        self.write_csv(csv_file)?;
        if let Some(meta) = &self.metadata {
            let mut s = serde_json::to_string_pretty(meta)?;
            s.push('\n');
            std::fs::write(dir.join(format!("{stem}.json")), s)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let mut table = Self::read_csv(std::fs::File::open(dir.join(format!("{stem}.csv")))?)?;
        let meta = dir.join(format!("{stem}.json"));
        if meta.exists() {
            table.metadata = Some(serde_json::from_str(&std::fs::read_to_string(meta)?)?);
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{coset_inner, periodize};
    use crate::testfn::{Harmonic, TestFunction};

    fn p(name: &str) -> CrystalGroup {
        CrystalGroup::preset(name).unwrap()
    }

    #[test]
    fn constant_element_for_p1() {
        let b = enumerate_basis(&p("p1"), 0, 0);
        assert_eq!(b.len(), 1);
        let v = b.eval(0, &GroupElement::new(0.3, 0.7, 2.0));
        assert!((v.re - TAU.sqrt()).abs() < 1e-14 && v.im.abs() < 1e-14);
    }

    #[test]
    fn p1_admits_every_label() {
        let b = enumerate_basis(&p("p1"), 2, 1);
        assert_eq!(b.len(), 25 * 3);
        assert!(b.elements().iter().all(|e| e.terms.len() == 1));
        let labels = b.indices();
        assert!(labels.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn orthonormal_under_coset_quadrature() {
        for name in ["p1", "p2", "p3", "p4", "p6"] {
            let b = enumerate_basis(&p(name), 2, 2);
            let q = CosetQuadrature::new(b.group(), [12, 12, 16]).unwrap();
            let samples: Vec<Vec<Complex64>> =
                (0..b.len()).map(|i| q.sample(&b.coset_function(i))).collect();
            for i in 0..b.len() {
                for j in 0..b.len() {
                    let g = q.inner(&samples[i], &samples[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g - want).norm() < 1e-10, "{name}: gram[{i}][{j}] = {g}");
                }
            }
        }
    }

    #[test]
    fn elements_are_gamma_invariant() {
        for name in ["p2", "p3", "p4", "p6"] {
            let group = p(name);
            let b = enumerate_basis(&group, 2, 2);
            let g = GroupElement::new(0.31, -0.77, 1.9);
            for gen in group.generators() {
                let h = group.element(&gen).compose(&g);
                for i in 0..b.len() {
                    assert!((b.eval(i, &h) - b.eval(i, &g)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn p4_projection_keeps_only_symmetric_combinations() {
        let b = enumerate_basis(&p("p4"), 1, 0);
        // orbits of k under quarter turns: {0}, {±e1, ±e2}, {(±1, ±1)}
        assert_eq!(b.len(), 3);
        let with_n = enumerate_basis(&p("p4"), 0, 3);
        // constant spatial part survives only for n divisible by 4
        assert_eq!(with_n.indices(), vec![BasisIndex::new(0, 0, 0)]);
    }

    #[test]
    fn separable_q_matches_direct_quadrature() {
        let group = p("p4");
        let b = enumerate_basis(&group, 1, 1);
        let gammas = vec![CrystalElement { m: 1, n: -1, j: 3 }];
        let band = BandLimit::new(5, 1).unwrap();
        let orders = Orders::new(16, 16, 16);
        let engine = TraceEngine::new(&b, &gammas, band, orders).unwrap();
        let region = group.translated_domain(&gammas[0]);
        let q = build_se2_quadrature(&region, orders).unwrap();
        for e in 0..b.len() {
            let fast = engine.q_matrix(e, 0, 2.7);
            let conj = {
                let b2 = b.clone();
                CosetFunction::from_invariant(&group, move |g| b2.eval(e, g).conj())
            };
            let direct = q_operator(&conj, &region, 2.7, band, &q).unwrap();
            assert!(fast.sub(&direct).hs_norm() < 1e-12, "element {e}");
        }
    }

    #[test]
    fn q_operator_norm_bound() {
        let group = p("p1");
        let b = enumerate_basis(&group, 1, 1);
        let omega = group.fundamental_domain().region;
        let q = build_se2_quadrature(&omega, Orders::new(20, 20, 16)).unwrap();
        for e in 0..b.len() {
            let phi = b.coset_function(e);
            let op = q_operator(&phi, &omega, 3.0, BandLimit::new(8, 2).unwrap(), &q).unwrap();
            let l1: f64 = q.nodes().map(|(g, w)| w * phi.eval(&g).norm()).sum();
            assert!(op.operator_norm() <= l1 + 1e-8);
        }
    }

    #[test]
    fn zero_function_has_zero_coefficients() {
        let group = p("p1");
        let b = enumerate_basis(&group, 1, 1);
        let f = TestFunction::Zero;
        let settings = SpectralSettings {
            radial_nodes: 8,
            transform_orders: Orders::new(8, 8, 8),
            domain_orders: Orders::new(8, 8, 8),
            ..Default::default()
        };
        let out = coefficient_trace(&f.to_fn(), &f.support(), &b, &settings).unwrap();
        assert!(out.values.iter().all(|v| *v == ZERO));
    }

    #[test]
    fn single_translate_for_support_inside_domain() {
        let group = p("p1");
        let f = TestFunction::gaussian([0.5, 0.5], 0.06, vec![Harmonic::new(0, 1.0, 0.0)]);
        assert_eq!(group.contributing(&f.support()), vec![CrystalElement::identity()]);
    }

    #[test]
    fn synthesis_analysis_round_trip() {
        let group = p("p4");
        let b = enumerate_basis(&group, 2, 4);
        let coeffs: Vec<Complex64> = (0..b.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let table = CoefficientTable::new(&b, &coeffs);
        let b2 = b.clone();
        let c2 = coeffs.clone();
        let f = CosetFunction::from_invariant(&group, move |g| b2.synthesize(&c2, g));
        let q = CosetQuadrature::new(&group, [16, 16, 16]).unwrap();
        let back = direct_coefficients(&f, &b, &q);
        for (a, c) in back.iter().zip(&coeffs) {
            assert!((a - c).norm() < 1e-10);
        }
        let g = GroupElement::new(0.4, 0.1, 0.3);
        assert!((series_reconstruct(&table, &b, &g).unwrap() - f.eval(&g)).norm() < 1e-12);
    }

    #[test]
    fn mismatched_table_is_rejected() {
        let b = enumerate_basis(&p("p1"), 1, 0);
        let other = enumerate_basis(&p("p1"), 0, 1);
        let table = CoefficientTable::new(&other, &vec![ZERO; other.len()]);
        assert!(matches!(
            series_reconstruct(&table, &b, &GroupElement::identity()),
            Err(Error::IndexMismatch(_))
        ));
    }

    #[test]
    fn ae_diagnostic_basics() {
        let b = enumerate_basis(&p("p1"), 1, 1);
        let zero = CoefficientTable::new(&b, &vec![ZERO; b.len()]);
        assert_eq!(ae_diagnostic(&zero, &b).unwrap(), 0.0);
        let mut unit = vec![ZERO; b.len()];
        unit[5] = Complex64::new(0.0, 1.0);
        let t = CoefficientTable::new(&b, &unit);
        assert!((ae_diagnostic(&t, &b).unwrap() - b.scale()).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let b = enumerate_basis(&p("p1"), 1, 1);
        let coeffs: Vec<Complex64> = (0..b.len())
            .map(|i| Complex64::new(1.0 / (i as f64 + 3.0), -(i as f64).sqrt() * 1e-300))
            .collect();
        let table = CoefficientTable::new(&b, &coeffs);
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k1,k2,n,re,im\n"));
        let back = CoefficientTable::read_csv(buf.as_slice()).unwrap();
        for (a, b) in back.entries.iter().zip(&table.entries) {
            assert_eq!(a.0, b.0);
            assert_eq!(a.1.re.to_bits(), b.1.re.to_bits());
            assert_eq!(a.1.im.to_bits(), b.1.im.to_bits());
        }
    }

    #[test]
    fn direct_coefficients_agree_with_coset_inner() {
        let group = p("p1");
        let b = enumerate_basis(&group, 1, 1);
        let f = TestFunction::gaussian([0.2, 0.1], 0.3, vec![Harmonic::new(1, 1.0, 0.3)]);
        let tilde = periodize(f.to_fn(), &f.support(), &group).unwrap();
        let q = CosetQuadrature::new(&group, [24, 24, 8]).unwrap();
        let fast = direct_coefficients(&tilde.function, &b, &q);
        for (i, v) in fast.iter().enumerate() {
            let slow = coset_inner(&tilde.function, &b.coset_function(i), &q);
            assert!((v - slow).norm() < 1e-13);
        }
    }

    #[test]
    fn trace_formula_matches_direct_inner_products_small() {
        let group = p("p1");
        let b = enumerate_basis(&group, 1, 1);
        let f = TestFunction::windowed(
            [0.3, 0.4],
            0.35,
            [1.5, -0.5],
            vec![Harmonic::new(0, 1.0, 0.0), Harmonic::new(1, 0.4, -0.2)],
        );
        let support = f.support();
        let settings = SpectralSettings {
            band: BandLimit::new(24, 4).unwrap(),
            p_max: 16.0,
            radial_nodes: 48,
            transform_orders: Orders::new(56, 56, 32),
            domain_orders: Orders::new(32, 32, 32),
            ..Default::default()
        };
        let trace = coefficient_trace(&f.to_fn(), &support, &b, &settings).unwrap();
        let tilde = periodize(f.to_fn(), &support, &group).unwrap();
        let direct = direct_coefficients(&tilde.function, &b, &CosetQuadrature::new(&group, [64, 64, 8]).unwrap());
        for (t, d) in trace.values.iter().zip(&direct) {
            assert!((t - d).norm() < 1e-8, "{t} vs {d}");
        }
    }

    #[test]
    fn matrix_form_equals_fast_trace() {
        let group = p("p4");
        let b = enumerate_basis(&group, 1, 2);
        let band = BandLimit::new(6, 2).unwrap();
        let gammas = vec![CrystalElement::identity(), CrystalElement { m: -1, n: 2, j: 1 }];
        let engine = TraceEngine::new(&b, &gammas, band, Orders::new(10, 10, 12)).unwrap();
        let grid = RadialGrid::new(5.0, 4).unwrap();
        let spectra: Vec<SpectralOperator> = grid
            .nodes()
            .iter()
            .map(|&p| {
                let vals: Vec<Complex64> = (0..band.dim() * band.dim())
                    .map(|i| Complex64::new((i as f64 * 0.7 + p).sin(), (i as f64 * 1.3).cos()))
                    .collect();
                SpectralOperator::from_row_major(p, band, &vals)
            })
            .collect();
        let fast = engine.coefficients(&spectra, &grid).unwrap();
        let all: Vec<usize> = (0..b.len()).collect();
        let slow = engine.matrix_forms(&spectra, &grid, &all).unwrap();
        for (f, s) in fast.iter().zip(&slow) {
            assert!((f - s.value).norm() < 1e-12 * (1.0 + f.norm()));
            assert_eq!(s.partial_sums.len(), band.n + 1);
        }
    }
}
