use std::f64::consts::TAU;

use num_complex::Complex64;
use proptest::prelude::*;

use se2_harmonic::conv_coset::{convolve_on_rule, product_support};
use se2_harmonic::group::GroupElement;
use se2_harmonic::quadrature::{build_se2_quadrature, uniform_circle, Orders, RadialGrid, Region};
use se2_harmonic::spectra::{
    fourier_transform, irrep_matrix, plancherel_group, reconstruct, AngularModes, BandLimit,
    SpectrumTable,
};
use se2_harmonic::testfn::{Harmonic, TestFunction};

fn element() -> impl Strategy<Value = GroupElement> {
    (0.0..1.5f64, 0.0..TAU, 0.0..TAU).prop_map(|(r, phi, th)| GroupElement::new(r * phi.cos(), r * phi.sin(), th))
}

/// `⟨U_p(g)e_n, e_m⟩` from the action `(U_p(g)h)(ω) = e^{ip⟨x,ω⟩} h(ω−θ)`.
fn action_entry(p: f64, g: &GroupElement, m: i64, n: i64) -> Complex64 {
    uniform_circle(256, 0.0)
        .iter()
        .map(|&(om, w)| {
            let phase = p * (g.x1 * om.cos() + g.x2 * om.sin()) + n as f64 * (om - g.theta()) - m as f64 * om;
            Complex64::from_polar(w / TAU, phase)
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn irrep_is_a_homomorphism(p in 0.1..6.0f64, g in element(), h in element()) {
        // |x| ≤ 3 after composing; guard covers J_k(18)
        let band = BandLimit::with_bessel_guard(6, 18.0, 1e-13).unwrap();
        let ug = irrep_matrix(p, &g, band).unwrap();
        let uh = irrep_matrix(p, &h, band).unwrap();
        let ugh = irrep_matrix(p, &g.compose(&h), band).unwrap();
        let k = band.interior() as i64;
        for m in -k..=k {
            for n in -k..=k {
                let d = ugh.get(m, n) - ug.mul(&uh).get(m, n);
                prop_assert!(d.norm() < 1e-10, "({m},{n}) off by {}", d.norm());
            }
        }
    }

    #[test]
    fn irrep_is_unitary_and_inverts(p in 0.1..12.0f64, g in element()) {
        let band = BandLimit::with_bessel_guard(8, 18.0, 1e-13).unwrap();
        let u = irrep_matrix(p, &g, band).unwrap();
        prop_assert!(u.mul(&u.adjoint()).interior_identity_defect() < 1e-10);
        let inv = irrep_matrix(p, &g.inverse(), band).unwrap();
        prop_assert!(inv.sub(&u.adjoint()).interior_max_abs() < 1e-12);
    }

    #[test]
    fn matrix_entries_follow_the_circle_action(p in 0.1..8.0f64, g in element(), m in -5i64..=5, n in -5i64..=5) {
        let band = BandLimit::new(8, 0).unwrap();
        let u = irrep_matrix(p, &g, band).unwrap();
        prop_assert!((u.get(m, n) - action_entry(p, &g, m, n)).norm() < 1e-11);
    }

    #[test]
    fn transform_is_linear(a in -2.0..2.0f64, b in -2.0..2.0f64, p in 0.2..8.0f64) {
        let band = BandLimit::new(8, 3).unwrap();
        let f1 = TestFunction::gaussian([0.1, 0.0], 0.4, vec![Harmonic::new(1, 1.0, 0.2)]);
        let f2 = TestFunction::windowed([0.0, -0.1], 0.5, [1.0, 0.0], vec![Harmonic::new(-1, 0.5, 0.0)]);
        let big = Region::centered_square([0.0, 0.0], 3.5).unwrap();
        prop_assert!(big.covers(&f1.support().bounding_region()) && big.covers(&f2.support().bounding_region()));
        let q = build_se2_quadrature(&big, Orders::new(24, 24, 32)).unwrap();
        let combo = |g: &GroupElement| f1.eval(g) * a + f2.eval(g) * b;
        let lhs = fourier_transform(combo, &big, p, band, &q).unwrap();
        let t1 = fourier_transform(|g: &GroupElement| f1.eval(g), &big, p, band, &q).unwrap();
        let t2 = fourier_transform(|g: &GroupElement| f2.eval(g), &big, p, band, &q).unwrap();
        let mut rhs = t1.scale(Complex64::new(a, 0.0));
        rhs.add_assign(&t2.scale(Complex64::new(b, 0.0)));
        prop_assert!(lhs.sub(&rhs).hs_norm() < 1e-12 * (1.0 + lhs.hs_norm()));
    }
}

#[test]
fn transform_of_involution_is_adjoint() {
    let band = BandLimit::new(12, 4).unwrap();
    let f = TestFunction::windowed([0.3, -0.2], 0.35, [1.5, 0.5], vec![Harmonic::new(0, 1.0, 0.0), Harmonic::new(2, 0.3, -0.4)]);
    let support = f.support();
    let star_region = Region::centered_square([0.0, 0.0], support.reach()).unwrap();
    let q = build_se2_quadrature(&support.bounding_region(), Orders::new(40, 40, 32)).unwrap();
    let q_star = build_se2_quadrature(&star_region, Orders::new(64, 64, 32)).unwrap();
    for p in [0.5, 2.0, 5.0] {
        let a = fourier_transform(|g: &GroupElement| f.eval(g), &support.bounding_region(), p, band, &q).unwrap();
        let b = fourier_transform(|g: &GroupElement| f.eval(&g.inverse()).conj(), &star_region, p, band, &q_star).unwrap();
        assert!(b.sub(&a.adjoint()).interior_max_abs() < 1e-8, "p = {p}");
    }
}

#[test]
fn zero_function_has_zero_transform() {
    let band = BandLimit::new(6, 2).unwrap();
    let f = TestFunction::Zero;
    let region = Region::centered_square([0.0, 0.0], 1.0).unwrap();
    let q = build_se2_quadrature(&region, Orders::new(8, 8, 16)).unwrap();
    let op = fourier_transform(|g: &GroupElement| f.eval(g), &region, 3.0, band, &q).unwrap();
    assert_eq!(op.hs_norm(), 0.0);
}

#[test]
fn convolution_reverses_the_product() {
    let band = BandLimit::new(16, 6).unwrap();
    let f1 = TestFunction::gaussian([0.6, 0.0], 0.5, vec![Harmonic::new(1, 1.0, 0.0)]);
    let f2 = TestFunction::gaussian([0.0, 0.5], 0.5, vec![Harmonic::new(-2, 1.0, 0.0), Harmonic::new(0, 0.5, 0.0)]);
    let (s1, s2) = (f1.support(), f2.support());
    let q1 = build_se2_quadrature(&s1.bounding_region(), Orders::new(32, 32, 16)).unwrap();
    let q2 = build_se2_quadrature(&s2.bounding_region(), Orders::new(48, 48, 64)).unwrap();
    let out = product_support(&s1, &s2).bounding_region();
    let q_out = build_se2_quadrature(&out, Orders::new(96, 96, 64)).unwrap();
    let h = convolve_on_rule(&f1.to_fn(), &q1, &f2, q_out);
    let h_modes = AngularModes::from_values(&h.quadrature, band, &h.values).unwrap();
    let a = AngularModes::sample(|g| f1.eval(g), &build_se2_quadrature(&s1.bounding_region(), Orders::new(48, 48, 64)).unwrap(), band).unwrap();
    let b = AngularModes::sample(|g| f2.eval(g), &q2, band).unwrap();
    for p in [0.7, 2.5, 5.0] {
        let hp = h_modes.transform(p).unwrap();
        let (ap, bp) = (a.transform(p).unwrap(), b.transform(p).unwrap());
        let scale = hp.interior_hs_norm();
        let right = bp.mul(&ap).sub(&hp).interior_hs_norm() / scale;
        let wrong = ap.mul(&bp).sub(&hp).interior_hs_norm() / scale;
        assert!(right < 1e-5, "p = {p}: {right}");
        assert!(wrong > 1e-2, "p = {p}: swapped order only off by {wrong}");
    }
}

#[test]
fn plancherel_constant_is_one() {
    let band = BandLimit::new(16, 6).unwrap();
    let grid = RadialGrid::new(12.0, 64).unwrap();
    let mut ratios = Vec::new();
    for f in [
        TestFunction::gaussian([0.0, 0.0], 0.5, vec![Harmonic::new(0, 1.0, 0.0), Harmonic::new(1, 0.3, 0.2)]),
        TestFunction::windowed([0.1, 0.1], 0.55, [1.0, -0.5], vec![Harmonic::new(-1, 1.0, 0.0)]),
        TestFunction::gaussian([-0.1, 0.05], 0.6, vec![Harmonic::new(2, 0.0, 1.0)]),
    ] {
        let region = f.support().bounding_region();
        let q = build_se2_quadrature(&region, Orders::new(48, 48, 64)).unwrap();
        let (lhs, rhs) = plancherel_group(|g| f.eval(g), &region, &grid, band, &q).unwrap();
        assert!((lhs - rhs).abs() / lhs < 1e-6, "{lhs} vs {rhs}");
        ratios.push(lhs / rhs);
    }
    let spread = ratios.iter().cloned().fold(f64::MIN, f64::max) - ratios.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 1e-6);
}

#[test]
fn reconstruction_recovers_values() {
    let band = BandLimit::new(16, 6).unwrap();
    let grid = RadialGrid::new(12.0, 64).unwrap();
    let f = TestFunction::gaussian([0.1, -0.1], 0.5, vec![Harmonic::new(0, 1.0, 0.0), Harmonic::new(-1, 0.4, 0.3)]);
    let region = f.support().bounding_region();
    let q = build_se2_quadrature(&region, Orders::new(48, 48, 64)).unwrap();
    let spectrum = SpectrumTable::compute(|g| f.eval(g), &region, &grid, band, &q, 1e-8).unwrap();
    let peak = f.eval(&GroupElement::new(0.1, -0.1, 0.0)).norm();
    for g in [
        GroupElement::new(0.0, 0.0, 0.0),
        GroupElement::new(0.3, -0.2, 1.0),
        GroupElement::new(-0.4, 0.2, 4.0),
        GroupElement::new(0.5, 0.5, 2.5),
    ] {
        let err = (reconstruct(&spectrum, &g).value - f.eval(&g)).norm();
        assert!(err < 1e-6 * peak, "{g}: {err}");
    }
}
