//! The action `(ψ ⊘ f)(Γg) = ∫ ψ(Γh) f(h⁻¹ ∘ g) dh` of compactly supported
//! group functions on coset functions, its Fourier coefficients, and the
//! two Plancherel formulas built on it.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coset_series::{Basis, SpectralSettings, TraceCoefficients, TraceEngine};
use crate::crystal::{periodize, CosetFunction, CosetQuadrature, CrystalGroup};
use crate::error::{Error, Result};
use crate::group::{rotate, GroupElement};
use crate::quadrature::{build_se2_quadrature, Disk, Orders, SE2Quadrature, TailReport};
use crate::spectra::{AngularModes, SpectralOperator, SpectrumTable};
use crate::testfn::{GroupFn, TestFunction};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `f*(g) = conj f(g⁻¹)`.
pub fn involution(f: GroupFn) -> GroupFn {
    Arc::new(move |g: &GroupElement| f(&g.inverse()).conj())
}

/// Support of `f*` given a support disk of `f`; inversion preserves `|x|`.
pub fn involution_support(support: &Disk) -> Disk {
    Disk {
        center: [0.0, 0.0],
        radius: support.reach(),
    }
}

/// A disk containing the translations of `supp f₁ ∘ supp f₂`.
pub fn product_support(s1: &Disk, s2: &Disk) -> Disk {
    Disk {
        center: s1.center,
        radius: s1.radius + s2.reach(),
    }
}

/// A function known only through its values at the nodes of a rule.
#[derive(Clone, Debug)]
pub struct SampledGroupFunction {
    pub quadrature: SE2Quadrature,
    pub values: Vec<Complex64>,
}

impl SampledGroupFunction {
    pub fn sample<F: Fn(&GroupElement) -> Complex64>(f: F, quadrature: SE2Quadrature) -> Self {
        let values = quadrature.nodes().map(|(g, _)| f(&g)).collect();
        Self { quadrature, values }
    }

    /// `∫ |f| dg` by the same rule.
    pub fn l1_norm(&self) -> f64 {
        self.quadrature
            .nodes()
            .zip(&self.values)
            .map(|((_, w), v)| w * v.norm())
            .sum()
    }
}

/// `f₁ ⋆ f₂` sampled at the nodes of `q_out`, with `f₁` integrated over `q1`.
///
/// `f₂(y, φ) = S(y) Σ c_n e^{inφ}`, so
/// `(f₁ ⋆ f₂)(x, θ) = Σ c_n e^{inθ} ∫ f₁(g) S(R_{−θ_g}(x − x_g)) e^{−inθ_g} dg`
/// and only the spatial nodes of `q_out` need a pass over `q1`.
pub fn convolve_on_rule(
    f1: &GroupFn,
    q1: &SE2Quadrature,
    f2: &TestFunction,
    q_out: SE2Quadrature,
) -> SampledGroupFunction {
    let harmonics = f2.harmonics();
    let kernel: Vec<(GroupElement, Complex64)> = q1
        .nodes()
        .filter_map(|(g, w)| {
            let v = f1(&g);
            (v != ZERO).then(|| (g, v * w))
        })
        .collect();
    // e^{−inθ_g} for each kernel node and harmonic
    let phases: Vec<Complex64> = kernel
        .iter()
        .flat_map(|(g, _)| harmonics.iter().map(move |h| Complex64::from_polar(1.0, -(h.n as f64) * g.theta())))
        .collect();
    let nh = harmonics.len();
    let mut values = Vec::with_capacity(q_out.len());
    let mut parts = vec![ZERO; nh];
    for sn in q_out.spatial_nodes() {
        parts.iter_mut().for_each(|v| *v = ZERO);
        for (i, (g, wv)) in kernel.iter().enumerate() {
            let d = [sn.x[0] - g.x1, sn.x[1] - g.x2];
            let s = f2.spatial(rotate(-g.theta(), d));
            if s == ZERO {
                continue;
            }
            let a = wv * s;
            for (p, e) in parts.iter_mut().zip(&phases[i * nh..(i + 1) * nh]) {
                *p += a * e;
            }
        }
        for &(th, _) in q_out.angular_nodes() {
            values.push(
                harmonics
                    .iter()
                    .zip(&parts)
                    .map(|(h, p)| h.coefficient() * Complex64::from_polar(1.0, h.n as f64 * th) * p)
                    .sum(),
            );
        }
    }
    SampledGroupFunction {
        quadrature: q_out,
        values,
    }
}

/// Where a convolution came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub psi: String,
    pub f: String,
    pub orders: Orders,
}

/// `ψ ⊘ f` as a lazily evaluated coset function.
#[derive(Clone, Debug)]
pub struct ConvolutionResult {
    pub function: CosetFunction,
    pub provenance: Provenance,
}

impl ConvolutionResult {
    pub fn eval(&self, g: &GroupElement) -> Complex64 {
        self.function.eval(g)
    }

    pub fn materialize(&self, grid: &[GroupElement]) -> Vec<Complex64> {
        grid.iter().map(|g| self.eval(g)).collect()
    }
}

/// `ψ ⊘ f` with `f` given by samples on a rule covering its support.
pub fn oslash_sampled(psi: &CosetFunction, f: &SampledGroupFunction, provenance: Provenance) -> ConvolutionResult {
    // (ψ⊘f)(Γg) = ∫ ψ(Γ g∘u⁻¹) f(u) du
    let kernel: Vec<(GroupElement, Complex64)> = f
        .quadrature
        .nodes()
        .zip(&f.values)
        .filter(|(_, v)| **v != ZERO)
        .map(|((u, w), v)| (u.inverse(), v * w))
        .collect();
    let inner = psi.clone();
    let function = CosetFunction::from_invariant(psi.group(), move |g| {
        kernel
            .iter()
            .fold(ZERO, |acc, (u_inv, wv)| acc + wv * inner.eval(&g.compose(u_inv)))
    });
    ConvolutionResult { function, provenance }
}

/// `ψ ⊘ f` with `f` supported in `support × S¹`; `orders` sets the rule
/// over the bounding square of the support.
pub fn oslash(psi: &CosetFunction, f: &GroupFn, support: &Disk, orders: Orders) -> Result<ConvolutionResult> {
    let support = Disk::new(support.center, support.radius)?;
    let q = build_se2_quadrature(&support.bounding_region(), orders)?;
    let sampled = SampledGroupFunction::sample(|g| f(g), q);
    if let Some(v) = sampled.values.iter().find(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Table(format!("non-finite kernel value {v}")));
    }
    Ok(oslash_sampled(
        psi,
        &sampled,
        Provenance {
            psi: "coset function".into(),
            f: format!("support {support:?}"),
            orders,
        },
    ))
}

/// Midpoint grid on `Ω`: cell midpoints times midpoints of the angle sector.
pub fn omega_grid(group: &CrystalGroup, counts: [usize; 3]) -> Vec<GroupElement> {
    let [ns, nt, nth] = counts;
    let step = group.rotation_step();
    let mut out = Vec::with_capacity(ns * nt * nth);
    for i in 0..ns {
        for j in 0..nt {
            let x = group.from_cell([(i as f64 + 0.5) / ns as f64, (j as f64 + 0.5) / nt as f64]);
            for l in 0..nth {
                out.push(GroupElement::new(x[0], x[1], step * (l as f64 + 0.5) / nth as f64));
            }
        }
    }
    out
}

/// Rules used to compare `(f₁ ⋆ f₂)~` with `f̃₁ ⊘ f₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvOrders {
    /// Rule over the support of `f₁` for the group convolution.
    pub group: Orders,
    /// Rule over the support of `f₂` for `⊘`.
    pub action: Orders,
}

/// Both sides of `(f₁ ⋆ f₂)~ = f̃₁ ⊘ f₂` sampled on `grid`.
pub fn tilde_conv_check(
    f1: &GroupFn,
    s1: &Disk,
    f2: &GroupFn,
    s2: &Disk,
    group: &CrystalGroup,
    orders: ConvOrders,
    grid: &[GroupElement],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let q1 = build_se2_quadrature(&s1.bounding_region(), orders.group)?;
    let (f1c, f2c) = (f1.clone(), f2.clone());
    let conv: GroupFn = Arc::new(crate::spectra::convolve_group(
        move |g: &GroupElement| f1c(g),
        move |g: &GroupElement| f2c(g),
        &q1,
    ));
    let lhs_fn = periodize(conv, &product_support(s1, s2), group)?;
    let rhs_fn = oslash(&periodize(f1.clone(), s1, group)?.function, f2, s2, orders.action)?;
    Ok((
        grid.iter().map(|g| lhs_fn.eval(g)).collect(),
        rhs_fn.materialize(grid),
    ))
}

/// Spectra of `f` on the settings' radial grid.
pub fn spectrum_of(f: &GroupFn, support: &Disk, settings: &SpectralSettings) -> Result<SpectrumTable> {
    let region = support.bounding_region();
    let q = build_se2_quadrature(&region, settings.transform_orders)?;
    SpectrumTable::compute(|g| f(g), &region, &settings.grid()?, settings.band, &q, settings.tail_tol)
}

/// `⟨f̃₁ ⊘ f₂, ψ_ℓ⟩ = C(2) Σ_γ ∫ tr[f̂₂(p) f̂₁(p) Q_{γΩ}^{ψ̄_ℓ}(p)] p dp` for every
/// basis element. `swap` multiplies the transforms in the other order.
pub fn conv_coefficient(
    f1: &GroupFn,
    s1: &Disk,
    f2: &GroupFn,
    s2: &Disk,
    basis: &Basis,
    settings: &SpectralSettings,
    swap: bool,
) -> Result<TraceCoefficients> {
    let a = spectrum_of(f1, s1, settings)?;
    let b = spectrum_of(f2, s2, settings)?;
    let product = if swap { a.product(&b) } else { b.product(&a) };
    let gammas = basis.group().contributing(&product_support(s1, s2));
    let engine = TraceEngine::new(basis, &gammas, settings.band, settings.domain_orders)?;
    let warning = product_tail(&a, &b, settings.tail_tol).warning();
    Ok(TraceCoefficients {
        values: engine.coefficients(&product.ops, &product.grid)?,
        gammas,
        warning,
    })
}

/// The three routes to `‖f̃‖²_{L²(Γ\SE(2), μ)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlancherelTriple {
    /// Quadrature of `|f̃|²` on the coset space.
    pub direct: f64,
    /// `(f̃ ⊘ f*)(Γe)`.
    pub via_conv: Complex64,
    /// `Σ_ℓ C(2) ∫ tr[f̂(p)* f̂(p) Q_K^{ψ̄_ℓ}(p)] p dp · ψ_ℓ(Γe)`.
    pub via_trace: Complex64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Rules for [`plancherel_via_conv`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlancherelSettings {
    pub spectral: SpectralSettings,
    pub coset_orders: [usize; 3],
    /// Rule over the support of `f*` for `⊘`.
    pub action_orders: Orders,
}

/// `‖f̃‖²` computed directly, as `(f̃ ⊘ f*)(Γe)`, and as the basis series of
/// `(f ⋆ f*)~` at `Γe`. `K` is the union of the translates `γΩ` meeting
/// the disk that contains `supp f ∘ (supp f)⁻¹`.
pub fn plancherel_via_conv(
    f: &GroupFn,
    support: &Disk,
    basis: &Basis,
    settings: &PlancherelSettings,
) -> Result<PlancherelTriple> {
    let group = basis.group();
    let tilde = periodize(f.clone(), support, group)?;
    let cq = CosetQuadrature::new(group, settings.coset_orders)?;
    let direct = cq.norm_lp(&cq.sample(&tilde.function), 2.0).powi(2);

    let star = involution(f.clone());
    let star_support = involution_support(support);
    let identity = GroupElement::identity();
    let via_conv = oslash(&tilde.function, &star, &star_support, settings.action_orders)?.eval(&identity);

    let spectrum = spectrum_of(f, support, &settings.spectral)?;
    let squared = spectrum.map(|op: &SpectralOperator| op.adjoint().mul(op));
    let k = Disk::new([0.0, 0.0], 2.0 * support.reach())?;
    let gammas = group.contributing(&k);
    let engine = TraceEngine::new(basis, &gammas, settings.spectral.band, settings.spectral.domain_orders)?;
    let coefficients = engine.coefficients(&squared.ops, &squared.grid)?;
    let via_trace = basis.synthesize(&coefficients, &identity);
    Ok(PlancherelTriple {
        direct,
        via_conv,
        via_trace,
        warning: product_tail(&spectrum, &spectrum, settings.spectral.tail_tol).warning(),
    })
}

/// Tail audit for `p ↦ f̂₂(p) f̂₁(p)` through `‖f̂₂f̂₁‖ ≤ ‖f̂₂‖ ‖f̂₁‖`.
fn product_tail(a: &SpectrumTable, b: &SpectrumTable, tail_tol: f64) -> TailReport {
    let bounds: Vec<f64> = a.ops.iter().zip(&b.ops).map(|(x, y)| x.hs_norm() * y.hs_norm()).collect();
    TailReport::new(&bounds, a.tail.at_p_max * b.tail.at_p_max, tail_tol)
}

/// `f̂` from samples of `f` on a rule; used when `f` is expensive to evaluate.
pub fn spectrum_of_samples(f: &SampledGroupFunction, settings: &SpectralSettings) -> Result<SpectrumTable> {
    AngularModes::from_values(&f.quadrature, settings.band, &f.values)?.spectrum(&settings.grid()?, settings.tail_tol)
}
