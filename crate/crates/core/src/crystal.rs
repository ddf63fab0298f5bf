//! Crystallographic subgroups `Γ = Λ ⋊ C_ν` of SE(2), their fundamental
//! domains, periodization onto `Γ\SE(2)` and the coset measure `μ`.
//!
//! `μ` is Haar measure restricted to the fundamental domain
//! `Ω = cell × [0, 2π/ν)`, so `μ(Γ\SE(2)) = |det B| (2π/ν) / 4π²`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{reduce_angle, rotate, GroupElement, HAAR_NORMALIZATION};
use crate::quadrature::{integrate_se2, Disk, Region, SE2Quadrature};
use crate::testfn::GroupFn;

const LATTICE_TOL: f64 = 1e-10;
const SNAP_TOL: f64 = 1e-12;

/// An element `(m a₁ + n a₂, 2πj/ν)` of Γ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CrystalElement {
    pub m: i64,
    pub n: i64,
    pub j: usize,
}

impl CrystalElement {
    pub fn identity() -> Self {
        Self { m: 0, n: 0, j: 0 }
    }
}

/// A lattice with a compatible cyclic point group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrystalGroup {
    /// `[a₁, a₂]`.
    lattice_basis: [[f64; 2]; 2],
    point_order: usize,
    /// `B⁻¹ R_{2π/ν} B` as an integer matrix, `B = [a₁ a₂]` by columns.
    certificate: [[i64; 2]; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
}

fn mat_mul(a: [[i64; 2]; 2], b: [[i64; 2]; 2]) -> [[i64; 2]; 2] {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn mat_vec(a: [[i64; 2]; 2], v: [i64; 2]) -> [i64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// Floor that treats values within `SNAP_TOL` below an integer as that integer.
fn snapped_floor(v: f64) -> (i64, f64) {
    let mut fl = v.floor();
    let mut frac = v - fl;
    if 1.0 - frac <= SNAP_TOL {
        fl += 1.0;
        frac = 0.0;
    }
    (fl as i64, frac)
}

impl CrystalGroup {
    pub fn new(a1: [f64; 2], a2: [f64; 2], point_order: usize) -> Result<Self> {
        if ![1, 2, 3, 4, 6].contains(&point_order) {
            return Err(Error::InvalidCrystal(format!(
                "point group order must be one of 1, 2, 3, 4, 6; got {point_order}"
            )));
        }
        if !a1.iter().chain(&a2).all(|v| v.is_finite()) {
            return Err(Error::InvalidCrystal("non-finite lattice basis".into()));
        }
        let det = a1[0] * a2[1] - a1[1] * a2[0];
        if det.abs() <= 1e-12 * (a1[0].hypot(a1[1]) * a2[0].hypot(a2[1])).max(1e-300) {
            return Err(Error::InvalidCrystal(format!(
                "lattice basis {a1:?}, {a2:?} is degenerate"
            )));
        }
        if det < 0.0 {
            return Err(Error::InvalidCrystal(format!(
                "lattice basis {a1:?}, {a2:?} must be positively oriented (det > 0)"
            )));
        }
        let mut group = Self {
            lattice_basis: [a1, a2],
            point_order,
            certificate: [[1, 0], [0, 1]],
            preset: None,
        };
        let angle = TAU / point_order as f64;
        let mut cert = [[0i64; 2]; 2];
        for (col, a) in [a1, a2].iter().enumerate() {
            let c = group.to_cell(rotate(angle, *a));
            for row in 0..2 {
                let r = c[row].round();
                if (c[row] - r).abs() > LATTICE_TOL {
                    return Err(Error::InvalidCrystal(format!(
                        "rotation by 2π/{point_order} does not map the lattice to itself \
                         (image of a{} has cell coordinates {c:?})",
                        col + 1
                    )));
                }
                cert[row][col] = r as i64;
            }
        }
        group.certificate = cert;
        Ok(group)
    }

    /// `p1`, `p2`, `p4` on the unit square lattice; `p3`, `p6` on the
    /// hexagonal lattice `a₁ = (1, 0)`, `a₂ = (1/2, √3/2)`.
    pub fn preset(name: &str) -> Result<Self> {
        let square = ([1.0, 0.0], [0.0, 1.0]);
        let hex = ([1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]);
        let (basis, order) = match name {
            "p1" => (square, 1),
            "p2" => (square, 2),
            "p4" => (square, 4),
            "p3" => (hex, 3),
            "p6" => (hex, 6),
            other => {
                return Err(Error::InvalidCrystal(format!(
                    "unknown preset {other:?} (expected p1, p2, p3, p4 or p6)"
                )))
            }
        };
        let mut g = Self::new(basis.0, basis.1, order)?;
        g.preset = Some(name.to_string());
        Ok(g)
    }

    pub fn lattice_basis(&self) -> [[f64; 2]; 2] {
        self.lattice_basis
    }

    pub fn point_order(&self) -> usize {
        self.point_order
    }

    pub fn preset_name(&self) -> Option<&str> {
        self.preset.as_deref()
    }

    /// Integer matrix of the generating rotation in lattice coordinates.
    pub fn certificate(&self) -> [[i64; 2]; 2] {
        self.certificate
    }

    /// `B⁻¹ R_{2πj/ν} B`.
    pub fn point_matrix(&self, j: usize) -> [[i64; 2]; 2] {
        (0..j % self.point_order).fold([[1, 0], [0, 1]], |acc, _| mat_mul(self.certificate, acc))
    }

    pub fn rotation_step(&self) -> f64 {
        TAU / self.point_order as f64
    }

    pub fn det(&self) -> f64 {
        let [a1, a2] = self.lattice_basis;
        a1[0] * a2[1] - a1[1] * a2[0]
    }

    /// Cell coordinates `B⁻¹ x`.
    pub fn to_cell(&self, x: [f64; 2]) -> [f64; 2] {
        let [a1, a2] = self.lattice_basis;
        let d = self.det();
        [(x[0] * a2[1] - x[1] * a2[0]) / d, (a1[0] * x[1] - a1[1] * x[0]) / d]
    }

    /// `B s`.
    pub fn from_cell(&self, s: [f64; 2]) -> [f64; 2] {
        let [a1, a2] = self.lattice_basis;
        [s[0] * a1[0] + s[1] * a2[0], s[0] * a1[1] + s[1] * a2[1]]
    }

    pub fn element(&self, gamma: &CrystalElement) -> GroupElement {
        let [x1, x2] = self.from_cell([gamma.m as f64, gamma.n as f64]);
        GroupElement::new(x1, x2, gamma.j as f64 * self.rotation_step())
    }

    /// Lattice translations by `a₁`, `a₂` and the generating rotation.
    pub fn generators(&self) -> Vec<CrystalElement> {
        let mut g = vec![
            CrystalElement { m: 1, n: 0, j: 0 },
            CrystalElement { m: 0, n: 1, j: 0 },
        ];
        if self.point_order > 1 {
            g.push(CrystalElement { m: 0, n: 0, j: 1 });
        }
        g
    }

    /// Product in Γ, computed in integer arithmetic.
    pub fn compose(&self, a: &CrystalElement, b: &CrystalElement) -> CrystalElement {
        let t = mat_vec(self.point_matrix(a.j), [b.m, b.n]);
        CrystalElement {
            m: a.m + t[0],
            n: a.n + t[1],
            j: (a.j + b.j) % self.point_order,
        }
    }

    pub fn inverse(&self, a: &CrystalElement) -> CrystalElement {
        let j = (self.point_order - a.j % self.point_order) % self.point_order;
        let t = mat_vec(self.point_matrix(j), [a.m, a.n]);
        CrystalElement {
            m: -t[0],
            n: -t[1],
            j,
        }
    }

    pub fn fundamental_domain(&self) -> FundamentalDomain {
        let [a1, a2] = self.lattice_basis;
        let step = self.rotation_step();
        FundamentalDomain {
            region: Region::parallelogram([0.0, 0.0], a1, a2, 0.0, step)
                .expect("validated lattice basis"),
            mu_volume: self.det().abs() * step * HAAR_NORMALIZATION,
        }
    }

    pub fn mu_volume(&self) -> f64 {
        self.det().abs() * self.rotation_step() * HAAR_NORMALIZATION
    }

    /// Split `g = γ ∘ ω` with `γ ∈ Γ` and `ω` in the half-open fundamental
    /// domain.
    pub fn reduce(&self, g: &GroupElement) -> (CrystalElement, GroupElement) {
        let step = self.rotation_step();
        let (j, frac) = snapped_floor(g.theta() / step);
        let j = j.rem_euclid(self.point_order as i64) as usize;
        let omega_theta = (frac * step).max(0.0);
        let y = rotate(-(j as f64) * step, g.translation_part());
        let c = self.to_cell(y);
        let (l1, s) = snapped_floor(c[0]);
        let (l2, t) = snapped_floor(c[1]);
        let lat = mat_vec(self.point_matrix(j), [l1, l2]);
        let [w1, w2] = self.from_cell([s, t]);
        (
            CrystalElement {
                m: lat[0],
                n: lat[1],
                j,
            },
            GroupElement::new(w1, w2, omega_theta),
        )
    }

    /// The region `γΩ`: the cell moved by γ times the sector `[θ_j, θ_j + 2π/ν)`.
    pub fn translated_domain(&self, gamma: &CrystalElement) -> Region {
        let g = self.element(gamma);
        let omega = self.fundamental_domain().region;
        let rot = gamma.j as f64 * self.rotation_step();
        Region::parallelogram(
            g.translation_part(),
            rotate(rot, omega.edges[0]),
            rotate(rot, omega.edges[1]),
            reduce_angle(rot),
            omega.theta_len,
        )
        .expect("rotated cell")
    }

    /// Every γ whose translate `γΩ` meets `support × S¹`, in `(j, m, n)` order.
    pub fn contributing(&self, support: &Disk) -> Vec<CrystalElement> {
        let [a1, a2] = self.lattice_basis;
        let diam = (a1[0] + a2[0])
            .hypot(a1[1] + a2[1])
            .max((a1[0] - a2[0]).hypot(a1[1] - a2[1]));
        let reach = support.reach() + diam;
        // ‖B⁻¹‖ bound through its Frobenius norm
        let d = self.det().abs();
        let inv_norm = (a1[0].powi(2) + a1[1].powi(2) + a2[0].powi(2) + a2[1].powi(2)).sqrt() / d;
        let lim = (reach * inv_norm).ceil() as i64 + 1;
        let mut out = Vec::new();
        for j in 0..self.point_order {
            for m in -lim..=lim {
                for n in -lim..=lim {
                    let gamma = CrystalElement { m, n, j };
                    let cell = self.translated_domain(&gamma);
                    if cell.distance_to_point(support.center) <= support.radius + 1e-12 {
                        out.push(gamma);
                    }
                }
            }
        }
        out
    }
}

/// `Ω` and its `μ`-volume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundamentalDomain {
    pub region: Region,
    pub mu_volume: f64,
}

/// A function on `Γ\SE(2)`: an evaluation rule on `Ω`, applied to the
/// canonical representative of any coset.
#[derive(Clone)]
pub struct CosetFunction {
    group: CrystalGroup,
    rule: GroupFn,
}

impl std::fmt::Debug for CosetFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CosetFunction").field("group", &self.group).finish_non_exhaustive()
    }
}

impl CosetFunction {
    /// `rule` is only ever evaluated on the fundamental domain.
    pub fn from_domain_rule(group: &CrystalGroup, rule: GroupFn) -> Self {
        Self {
            group: group.clone(),
            rule,
        }
    }

    /// The coset function induced by a Γ-invariant function on SE(2).
    pub fn from_invariant<F>(group: &CrystalGroup, f: F) -> Self
    where
        F: Fn(&GroupElement) -> Complex64 + Send + Sync + 'static,
    {
        Self::from_domain_rule(group, Arc::new(f))
    }

    pub fn zero(group: &CrystalGroup) -> Self {
        Self::from_invariant(group, |_| Complex64::new(0.0, 0.0))
    }

    pub fn group(&self) -> &CrystalGroup {
        &self.group
    }

    /// Value at the coset `Γg`.
    pub fn eval(&self, g: &GroupElement) -> Complex64 {
        let (_, omega) = self.group.reduce(g);
        (self.rule)(&omega)
    }

    /// Evaluation rule on the group (through the canonical representative).
    pub fn to_fn(&self) -> GroupFn {
        let me = self.clone();
        Arc::new(move |g: &GroupElement| me.eval(g))
    }

    /// Pointwise linear combination `a·self + b·other`.
    pub fn combine(&self, a: Complex64, other: &CosetFunction, b: Complex64) -> CosetFunction {
        let (l, r) = (self.rule.clone(), other.rule.clone());
        Self::from_domain_rule(&self.group, Arc::new(move |g| a * l(g) + b * r(g)))
    }
}

/// A periodization `f̃(Γg) = Σ_γ f(γ ∘ g)` with its finite contributing set.
#[derive(Clone, Debug)]
pub struct Periodized {
    pub function: CosetFunction,
    pub contributing: Vec<CrystalElement>,
    pub support: Disk,
}

impl Periodized {
    pub fn eval(&self, g: &GroupElement) -> Complex64 {
        self.function.eval(g)
    }
}

/// Periodize `f`, supported in `support × S¹`, over Γ.
pub fn periodize(f: GroupFn, support: &Disk, group: &CrystalGroup) -> Result<Periodized> {
    let support = Disk::new(support.center, support.radius)?;
    let contributing = group.contributing(&support);
    let elements: Vec<GroupElement> = contributing.iter().map(|c| group.element(c)).collect();
    let rule: GroupFn = Arc::new(move |omega: &GroupElement| {
        elements
            .iter()
            .map(|gamma| {
                let h = gamma.compose(omega);
                if support.contains(h.translation_part()) {
                    f(&h)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .sum()
    });
    Ok(Periodized {
        function: CosetFunction::from_domain_rule(group, rule),
        contributing,
        support,
    })
}

/// Equal-weight periodic rule for `∫_{Γ\SE(2)} · dμ`.
///
/// Nodes are cell midpoints on an `n_s × n_t` grid times `n_θ` uniform
/// angles over the whole circle. The full-circle box covers `Γ\SE(2)`
/// exactly ν times, and the integrand is periodic in every coordinate, so
/// equal weights `μ(Γ\SE(2)) / (n_s n_t n_θ)` give a spectrally accurate rule.
#[derive(Clone, Debug)]
pub struct CosetQuadrature {
    group: CrystalGroup,
    orders: [usize; 3],
    nodes: Vec<GroupElement>,
    weight: f64,
}

impl CosetQuadrature {
    pub fn new(group: &CrystalGroup, orders: [usize; 3]) -> Result<Self> {
        if orders.iter().any(|&o| o < 1) {
            return Err(Error::InvalidOrders(orders.to_vec()));
        }
        let [ns, nt, nth] = orders;
        let mut nodes = Vec::with_capacity(ns * nt * nth);
        for i in 0..ns {
            for j in 0..nt {
                let x = group.from_cell([(i as f64 + 0.5) / ns as f64, (j as f64 + 0.5) / nt as f64]);
                for l in 0..nth {
                    nodes.push(GroupElement::new(x[0], x[1], TAU * l as f64 / nth as f64));
                }
            }
        }
        Ok(Self {
            group: group.clone(),
            orders,
            nodes,
            weight: group.mu_volume() / (ns * nt * nth) as f64,
        })
    }

    pub fn group(&self) -> &CrystalGroup {
        &self.group
    }

    pub fn orders(&self) -> [usize; 3] {
        self.orders
    }

    /// Nodes in `(s, t, θ)` order, θ fastest. They are not reduced to Ω.
    pub fn nodes(&self) -> &[GroupElement] {
        &self.nodes
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn sample(&self, f: &CosetFunction) -> Vec<Complex64> {
        self.nodes.iter().map(|g| f.eval(g)).collect()
    }

    pub fn integrate(&self, values: &[Complex64]) -> Complex64 {
        values.iter().sum::<Complex64>() * self.weight
    }

    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<Complex64>() * self.weight
    }

    pub fn norm_lp(&self, values: &[Complex64], p: f64) -> f64 {
        (values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * self.weight).powf(1.0 / p)
    }
}

/// `⟨φ₁, φ₂⟩ = ∫ φ₁ conj(φ₂) dμ`.
pub fn coset_inner(a: &CosetFunction, b: &CosetFunction, q: &CosetQuadrature) -> Complex64 {
    q.nodes()
        .iter()
        .map(|g| a.eval(g) * b.eval(g).conj())
        .sum::<Complex64>()
        * q.weight()
}

/// Both sides of `∫_{Γ\SE(2)} f̃ dμ = ∫_{SE(2)} f dg`.
pub fn weil_check(
    f: GroupFn,
    support: &Disk,
    group: &CrystalGroup,
    q_group: &SE2Quadrature,
    q_coset: &CosetQuadrature,
) -> Result<(Complex64, Complex64)> {
    if !q_group.region().covers(&support.bounding_region()) {
        return Err(Error::NotCovered(format!(
            "quadrature region {:?} does not contain support {support:?}",
            q_group.region()
        )));
    }
    let rhs = integrate_se2(|g| f(g), q_group)?;
    let tilde = periodize(f, support, group)?;
    let lhs = q_coset.integrate(&q_coset.sample(&tilde.function));
    Ok((lhs, rhs))
}

/// `φ_γ(g) = 1_{γΩ}(g) φ(Γg)`.
pub fn masked(phi: &CosetFunction, gamma: &CrystalElement) -> impl Fn(&GroupElement) -> Complex64 {
    let group = phi.group().clone();
    let phi = phi.clone();
    let gamma = *gamma;
    move |g: &GroupElement| {
        let (c, _) = group.reduce(g);
        if c == gamma {
            phi.eval(g)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }
}

/// Angle of the `j`-th point-group rotation.
pub fn point_angle(group: &CrystalGroup, j: usize) -> f64 {
    j as f64 * 2.0 * PI / group.point_order() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::build_se2_quadrature;
    use crate::testfn::{Harmonic, TestFunction};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn presets_and_certificates() {
        for name in ["p1", "p2", "p3", "p4", "p6"] {
            let g = CrystalGroup::preset(name).unwrap();
            let m = g.point_matrix(g.point_order());
            assert_eq!(m, [[1, 0], [0, 1]], "{name}: R^ν must be the identity");
        }
        assert_eq!(CrystalGroup::preset("p4").unwrap().certificate(), [[0, -1], [1, 0]]);
        assert!(CrystalGroup::new([1.0, 0.0], [0.0, 1.0], 3).is_err());
        assert!(CrystalGroup::new([1.0, 0.0], [2.0, 0.0], 1).is_err());
        assert!(CrystalGroup::new([1.0, 0.0], [0.0, 1.0], 5).is_err());
        assert!(CrystalGroup::preset("p7").is_err());
        assert!(CrystalGroup::new([0.0, 1.0], [1.0, 0.0], 1).is_err());
    }

    #[test]
    fn mu_volumes() {
        let p1 = CrystalGroup::preset("p1").unwrap();
        assert!((p1.mu_volume() - 1.0 / TAU).abs() < 1e-15);
        let p4 = CrystalGroup::preset("p4").unwrap();
        assert!((p4.mu_volume() - 1.0 / (4.0 * TAU)).abs() < 1e-15);
        let fd = p4.fundamental_domain();
        assert!((fd.region.haar_measure() - fd.mu_volume).abs() < 1e-15);
    }

    #[test]
    fn reduce_examples() {
        let p1 = CrystalGroup::preset("p1").unwrap();
        let (gamma, omega) = p1.reduce(&GroupElement::new(1.5, -0.25, 0.7));
        assert_eq!(gamma, CrystalElement { m: 1, n: -1, j: 0 });
        assert!(omega.approx_eq(&GroupElement::new(0.5, 0.75, 0.7), 1e-14));

        let p4 = CrystalGroup::preset("p4").unwrap();
        let (gamma, omega) = p4.reduce(&GroupElement::new(0.0, 0.0, 3.0 * PI / 4.0));
        assert_eq!(gamma, CrystalElement { m: 0, n: 0, j: 1 });
        assert!(p4.element(&gamma).approx_eq(&GroupElement::rotation(FRAC_PI_2), 1e-14));
        assert!(omega.approx_eq(&GroupElement::rotation(PI / 4.0), 1e-14));

        let inside = GroupElement::new(0.3, 0.6, 0.2);
        let (gamma, omega) = p4.reduce(&inside);
        assert_eq!(gamma, CrystalElement::identity());
        assert_eq!(omega, inside);
    }

    #[test]
    fn boundary_points_resolve_into_half_open_domain() {
        let p4 = CrystalGroup::preset("p4").unwrap();
        let (gamma, omega) = p4.reduce(&GroupElement::new(1.0 - 1e-15, 2.0, FRAC_PI_2 - 1e-15));
        assert!(omega.x1 >= 0.0 && omega.x1 < 1.0 && omega.x2 >= 0.0 && omega.x2 < 1.0);
        assert!(omega.theta() < FRAC_PI_2);
        assert!(p4.element(&gamma).compose(&omega).distance(&GroupElement::new(1.0, 2.0, FRAC_PI_2)) < 1e-10);
    }

    #[test]
    fn integer_composition_matches_group_law() {
        let p6 = CrystalGroup::preset("p6").unwrap();
        let a = CrystalElement { m: 2, n: -1, j: 4 };
        let b = CrystalElement { m: -3, n: 1, j: 5 };
        let ab = p6.compose(&a, &b);
        let direct = p6.element(&a).compose(&p6.element(&b));
        assert!(p6.element(&ab).approx_eq(&direct, 1e-12));
        let inv = p6.inverse(&a);
        assert!(p6.element(&inv).approx_eq(&p6.element(&a).inverse(), 1e-12));
    }

    #[test]
    fn single_term_periodization_inside_domain() {
        let p1 = CrystalGroup::preset("p1").unwrap();
        let f = TestFunction::gaussian([0.5, 0.5], 0.05, vec![Harmonic::new(1, 1.0, 0.0)]);
        let tilde = periodize(f.to_fn(), &f.support(), &p1).unwrap();
        assert_eq!(tilde.contributing, vec![CrystalElement::identity()]);
        let w = GroupElement::new(0.52, 0.47, 1.0);
        assert!((tilde.eval(&w) - f.eval(&w)).norm() < 1e-15);
    }

    #[test]
    fn periodization_straddling_a_wall() {
        let p1 = CrystalGroup::preset("p1").unwrap();
        let f = TestFunction::gaussian([1.0, 0.5], 0.1, vec![Harmonic::new(0, 1.0, 0.0)]);
        let tilde = periodize(f.to_fn(), &f.support(), &p1).unwrap();
        let g = GroupElement::new(0.05, 0.5, 0.3);
        // cosets through (0.05, ·) also contain (1.05, ·) and (-0.95, ·)
        let want = f.eval(&g) + f.eval(&GroupElement::new(1.05, 0.5, 0.3));
        assert!((tilde.eval(&g) - want).norm() < 1e-15);
    }

    #[test]
    fn weil_formula_for_a_wide_bump() {
        for name in ["p1", "p4"] {
            let group = CrystalGroup::preset(name).unwrap();
            let f = TestFunction::gaussian(
                [0.3, -0.2],
                0.45,
                vec![Harmonic::new(0, 1.0, 0.0), Harmonic::new(1, 0.2, 0.1)],
            );
            let support = f.support();
            let q = build_se2_quadrature(&support.bounding_region(), (64, 64, 8).into()).unwrap();
            let qc = CosetQuadrature::new(&group, [32, 32, 32]).unwrap();
            let (lhs, rhs) = weil_check(f.to_fn(), &support, &group, &q, &qc).unwrap();
            assert!((lhs - rhs).norm() / rhs.norm() < 1e-8, "{name}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn constant_inner_product_is_mu_volume() {
        for name in ["p1", "p3", "p4", "p6"] {
            let group = CrystalGroup::preset(name).unwrap();
            let one = CosetFunction::from_invariant(&group, |_| Complex64::new(1.0, 0.0));
            let q = CosetQuadrature::new(&group, [4, 4, 6]).unwrap();
            assert!((coset_inner(&one, &one, &q).re - group.mu_volume()).abs() < 1e-15);
        }
    }

    #[test]
    fn contributing_set_covers_support() {
        let p4 = CrystalGroup::preset("p4").unwrap();
        let support = Disk::new([0.2, 0.1], 1.3).unwrap();
        let set = p4.contributing(&support);
        // every point of a fine sample of the support reduces to a listed γ
        for i in 0..40 {
            for k in 0..40 {
                let x = [-1.1 + 2.6 * i as f64 / 39.0, -1.2 + 2.6 * k as f64 / 39.0];
                if !support.contains(x) {
                    continue;
                }
                for th in [0.1, 2.0, 4.0, 6.0] {
                    let (gamma, _) = p4.reduce(&GroupElement::new(x[0], x[1], th));
                    assert!(set.contains(&gamma), "{gamma:?} missing");
                }
            }
        }
    }
}
