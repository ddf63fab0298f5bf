use std::f64::consts::TAU;

use num_complex::Complex64;
use proptest::prelude::*;

use se2_harmonic::crystal::{periodize, weil_check, CosetQuadrature, CrystalElement, CrystalGroup};
use se2_harmonic::group::GroupElement;
use se2_harmonic::quadrature::{build_se2_quadrature, Orders};
use se2_harmonic::testfn::{Harmonic, TestFunction};

const PRESETS: [&str; 5] = ["p1", "p2", "p3", "p4", "p6"];

fn preset() -> impl Strategy<Value = CrystalGroup> {
    prop::sample::select(PRESETS.to_vec()).prop_map(|p| CrystalGroup::preset(p).unwrap())
}

fn element() -> impl Strategy<Value = GroupElement> {
    (-6.0..6.0f64, -6.0..6.0f64, -10.0..10.0f64).prop_map(|(a, b, t)| GroupElement::new(a, b, t))
}

fn gamma() -> impl Strategy<Value = (i64, i64, usize)> {
    (-4i64..=4, -4i64..=4, 0usize..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reduce_tiles_the_group(group in preset(), g in element()) {
        let (gamma, omega) = group.reduce(&g);
        prop_assert!(group.fundamental_domain().region.contains(&omega));
        prop_assert!(group.element(&gamma).compose(&omega).approx_eq(&g, 1e-9));
    }

    #[test]
    fn reduce_is_constant_on_cosets(group in preset(), g in element(), (m, n, j) in gamma()) {
        let gamma = CrystalElement { m, n, j: j % group.point_order() };
        let moved = group.element(&gamma).compose(&g);
        let (_, a) = group.reduce(&g);
        let (_, b) = group.reduce(&moved);
        prop_assert!(a.approx_eq(&b, 1e-8), "{a} vs {b}");
    }

    #[test]
    fn element_law_is_closed(group in preset(), (m1, n1, j1) in gamma(), (m2, n2, j2) in gamma()) {
        let nu = group.point_order();
        let a = CrystalElement { m: m1, n: n1, j: j1 % nu };
        let b = CrystalElement { m: m2, n: n2, j: j2 % nu };
        let ab = group.compose(&a, &b);
        prop_assert!(group.element(&ab).approx_eq(&group.element(&a).compose(&group.element(&b)), 1e-9));
        prop_assert_eq!(group.compose(&a, &group.inverse(&a)), CrystalElement::identity());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn periodization_is_invariant(group in preset(), g in element(), (m, n, j) in gamma()) {
        let f = TestFunction::windowed([0.3, -0.1], 0.3, [1.0, 2.0], vec![Harmonic::new(1, 1.0, 0.5), Harmonic::new(-2, 0.2, 0.0)]);
        let tilde = periodize(f.to_fn(), &f.support(), &group).unwrap();
        let gamma = CrystalElement { m, n, j: j % group.point_order() };
        let moved = group.element(&gamma).compose(&g);
        prop_assert!((tilde.eval(&g) - tilde.eval(&moved)).norm() < 1e-12);
    }
}

#[test]
fn coset_volume_matches_haar_measure_of_domain() {
    for name in PRESETS {
        let group = CrystalGroup::preset(name).unwrap();
        let q = CosetQuadrature::new(&group, [4, 4, 4]).unwrap();
        let one = vec![Complex64::new(1.0, 0.0); q.nodes().len()];
        let vol = q.integrate(&one).re;
        let expected = group.det().abs() / TAU / group.point_order() as f64;
        assert!((vol - expected).abs() < 1e-14, "{name}: {vol} vs {expected}");
        assert!((group.mu_volume() - expected).abs() < 1e-14);
    }
}

#[test]
fn weil_formula_for_a_bump_over_many_cells() {
    // support radius 1.8 spans at least nine unit cells
    let f = TestFunction::windowed([0.2, -0.3], 0.3, [1.0, 0.5], vec![Harmonic::new(0, 1.0, 0.0), Harmonic::new(1, 0.2, 0.1)]);
    let support = f.support();
    assert!(support.radius >= 1.5);
    for name in ["p1", "p4", "p6"] {
        let group = CrystalGroup::preset(name).unwrap();
        let q = build_se2_quadrature(&support.bounding_region(), Orders::new(48, 48, 8)).unwrap();
        let cq = CosetQuadrature::new(&group, [48, 48, 4]).unwrap();
        let (lhs, rhs) = weil_check(f.to_fn(), &support, &group, &q, &cq).unwrap();
        assert!((lhs - rhs).norm() / rhs.norm() < 1e-6, "{name}: {lhs} vs {rhs}");
    }
}
