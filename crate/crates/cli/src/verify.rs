use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use se2_harmonic::conv_coset::{
    convolve_on_rule, omega_grid, plancherel_via_conv, product_support, spectrum_of, spectrum_of_samples,
    tilde_conv_check, ConvOrders, PlancherelSettings,
};
use se2_harmonic::coset_series::{direct_coefficients, enumerate_basis, TraceEngine};
use se2_harmonic::crystal::{periodize, weil_check, CosetQuadrature};
use se2_harmonic::group::GroupElement;
use se2_harmonic::quadrature::{build_se2_quadrature, Orders};
use se2_harmonic::spectra::{irrep_matrix, plancherel_group, reconstruct, BandLimit};
use se2_harmonic::testfn::TestFunction;
use se2_harmonic::Result;

use crate::commands::max_diff;
use crate::config::Experiment;
use crate::output::write_json;
use crate::{Options, Outcome};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub defect: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Default)]
struct Report {
    checks: Vec<Check>,
    warnings: Vec<String>,
}

impl Report {
    fn add(&mut self, name: impl Into<String>, defect: f64, tolerance: f64) {
        self.checks.push(Check {
            name: name.into(),
            defect,
            tolerance,
            passed: defect < tolerance,
        });
    }

    fn warn(&mut self, w: Option<String>, context: &str) {
        if let Some(w) = w {
            self.warnings.push(format!("{context}: {w}"));
        }
    }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn run(exp: &Experiment, opts: &Options) -> Result<Outcome> {
    let mut report = Report::default();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    irreps(exp, &mut rng, &mut report)?;
    weil(exp, &mut report)?;
    plancherel(exp, &mut report)?;
    convolution_theorem(exp, opts.swap_conv_order, &mut report)?;
    reconstruction(exp, &mut rng, &mut report)?;
    coefficients(exp, &mut report)?;
    tilde_conv(exp, &mut report)?;
    plancherel_conv(exp, &mut report)?;

    println!("{:<36} {:>12} {:>12}  result", "check", "defect", "tolerance");
    for c in &report.checks {
        println!(
            "{:<36} {:>12.3e} {:>12.3e}  {}",
            c.name,
            c.defect,
            c.tolerance,
            if c.passed { "pass" } else { "FAIL" }
        );
    }
    let passed = report.checks.iter().all(|c| c.passed);
    write_json(
        &opts.out,
        "verify.json",
        &json!({
            "passed": passed,
            "seed": opts.seed,
            "swap_conv_order": opts.swap_conv_order,
            "checks": report.checks,
            "warnings": report.warnings,
            "config": exp.expanded(),
        }),
    )?;
    Ok(Outcome {
        failures: report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} (defect {:e}, tolerance {:e})", c.name, c.defect, c.tolerance))
            .collect(),
        warnings: report.warnings,
    })
}

/// Interior unitarity and homomorphism defects of `U_p` at random `(p, g)`, `|x| ≤ 3`.
fn irreps(exp: &Experiment, rng: &mut ChaCha8Rng, report: &mut Report) -> Result<()> {
    let c = &exp.config;
    // products reach |x| ≤ 6, so the guard must cover Bessel orders up to p_max·6
    let band = BandLimit::with_bessel_guard(c.band.interior(), 6.0 * c.radial.p_max, 1e-12)?;
    let random_element = |rng: &mut ChaCha8Rng| {
        let r = 3.0 * rng.gen::<f64>().sqrt();
        let phi = rng.gen_range(0.0..TAU);
        GroupElement::new(r * phi.cos(), r * phi.sin(), rng.gen_range(0.0..TAU))
    };
    let (mut unitarity, mut homomorphism) = (0.0f64, 0.0f64);
    for _ in 0..c.verify.irrep_samples {
        let p = c.radial.p_max * (1.0 - rng.gen::<f64>());
        let g = random_element(rng);
        let h = random_element(rng);
        let ug = irrep_matrix(p, &g, band)?;
        unitarity = unitarity.max(ug.mul(&ug.adjoint()).interior_identity_defect());
        let prod = ug.mul(&irrep_matrix(p, &h, band)?);
        let direct = irrep_matrix(p, &g.compose(&h), band)?;
        homomorphism = homomorphism.max(prod.sub(&direct).interior_max_abs());
    }
    report.add("irrep.unitarity", unitarity, c.tolerances.irrep);
    report.add("irrep.homomorphism", homomorphism, c.tolerances.irrep);
    Ok(())
}

fn weil(exp: &Experiment, report: &mut Report) -> Result<()> {
    let c = &exp.config;
    let cq = CosetQuadrature::new(&exp.group, c.quadrature.coset)?;
    for (i, f) in c.functions.iter().enumerate() {
        let support = f.support();
        let q = build_se2_quadrature(&support.bounding_region(), exp.orders(c.quadrature.transform))?;
        let (lhs, rhs) = weil_check(f.to_fn(), &support, &exp.group, &q, &cq)?;
        let defect = (lhs - rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
        report.add(format!("weil[{i}]"), defect, c.tolerances.weil);
    }
    Ok(())
}

fn plancherel(exp: &Experiment, report: &mut Report) -> Result<()> {
    let c = &exp.config;
    let settings = exp.spectral();
    let grid = settings.grid()?;
    let mut ratios = Vec::new();
    for (i, f) in c.functions.iter().enumerate() {
        let region = f.support().bounding_region();
        let q = build_se2_quadrature(&region, settings.transform_orders)?;
        let (lhs, rhs) = plancherel_group(|g| f.eval(g), &region, &grid, settings.band, &q)?;
        report.add(format!("plancherel[{i}]"), relative(rhs, lhs), c.tolerances.plancherel);
        ratios.push(lhs / rhs);
    }
    let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
    let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
    report.add("plancherel.ratio_spread", hi - lo, c.tolerances.plancherel);
    Ok(())
}

/// `‖f̂₂(p)f̂₁(p) − (f₁⋆f₂)^(p)‖` over the interior block, relative to the
/// peak of `‖(f₁⋆f₂)^‖` over the grid.
pub fn convolution_defect(
    f1: &TestFunction,
    f2: &TestFunction,
    exp: &Experiment,
    swap: bool,
) -> Result<(f64, Option<String>)> {
    let c = &exp.config;
    let settings = exp.spectral();
    let a = spectrum_of(&f1.to_fn(), &f1.support(), &settings)?;
    let b = spectrum_of(&f2.to_fn(), &f2.support(), &settings)?;
    let q1 = build_se2_quadrature(&f1.support().bounding_region(), exp.orders(c.quadrature.conv_group))?;
    // keep the spatial node density of the transform rule on the wider product support
    let out = product_support(&f1.support(), &f2.support());
    let t = settings.transform_orders;
    let scale = out.radius / f1.support().radius.max(f2.support().radius);
    let widen = |n: usize| (n as f64 * scale).ceil() as usize;
    let q_out = build_se2_quadrature(&out.bounding_region(), Orders::new(widen(t.x1), widen(t.x2), t.theta))?;
    let h = convolve_on_rule(&f1.to_fn(), &q1, f2, q_out);
    let hh = spectrum_of_samples(&h, &settings)?;
    let peak = hh.ops.iter().map(|o| o.interior_hs_norm()).fold(0.0, f64::max);
    let mut defect = 0.0f64;
    for ((x, y), z) in a.ops.iter().zip(&b.ops).zip(&hh.ops) {
        let product = if swap { x.mul(y) } else { y.mul(x) };
        defect = defect.max(product.sub(z).interior_hs_norm());
    }
    Ok((defect / peak.max(f64::MIN_POSITIVE), hh.tail.warning()))
}

fn convolution_theorem(exp: &Experiment, swap: bool, report: &mut Report) -> Result<()> {
    let c = &exp.config;
    let f1 = &c.functions[0];
    let f2 = c.functions.get(1).unwrap_or(f1);
    let (defect, warning) = convolution_defect(f1, f2, exp, swap)?;
    report.warn(warning, "convolution");
    report.add("convolution_theorem", defect, c.tolerances.convolution);
    Ok(())
}

fn reconstruction(exp: &Experiment, rng: &mut ChaCha8Rng, report: &mut Report) -> Result<()> {
    let c = &exp.config;
    let settings = exp.spectral();
    let f = &c.functions[0];
    let support = f.support();
    let spectrum = spectrum_of(&f.to_fn(), &support, &settings)?;
    report.warn(spectrum.tail.warning(), "reconstruction");
    let (mut err, mut peak) = (0.0f64, 0.0f64);
    for _ in 0..c.verify.reconstruction_points {
        let r = support.radius / 3.0 * rng.gen::<f64>().sqrt();
        let phi = rng.gen_range(0.0..TAU);
        let g = GroupElement::new(
            support.center[0] + r * phi.cos(),
            support.center[1] + r * phi.sin(),
            rng.gen_range(0.0..TAU),
        );
        let exact = f.eval(&g);
        err = err.max((reconstruct(&spectrum, &g).value - exact).norm());
        peak = peak.max(exact.norm());
    }
    report.add("reconstruction", err / peak.max(f64::MIN_POSITIVE), c.tolerances.reconstruction);
    Ok(())
}

/// Trace-formula coefficients against direct inner products, and the
/// matrix-element form against the trace form.
fn coefficients(exp: &Experiment, report: &mut Report) -> Result<()> {
    let c = &exp.config;
    let settings = exp.spectral();
    let grid = settings.grid()?;
    let truncation = c.verify.coefficient_basis.clone().unwrap_or_else(|| c.basis.clone());
    let basis = enumerate_basis(&exp.group, truncation.k_max, truncation.n_max);
    let cq = CosetQuadrature::new(&exp.group, c.quadrature.coset)?;
    let chosen: Vec<usize> = (0..basis.len().min(c.verify.matrix_form_elements)).collect();
    for (i, f) in c.functions.iter().enumerate() {
        let support = f.support();
        let spectrum = spectrum_of(&f.to_fn(), &support, &settings)?;
        report.warn(spectrum.tail.warning(), &format!("coefficients[{i}]"));
        let gammas = exp.group.contributing(&support);
        let engine = TraceEngine::new(&basis, &gammas, settings.band, settings.domain_orders)?;
        let trace = engine.coefficients(&spectrum.ops, &grid)?;
        let tilde = periodize(f.to_fn(), &support, &exp.group)?;
        let direct = direct_coefficients(&tilde.function, &basis, &cq);
        let defect = trace
            .iter()
            .zip(&direct)
            .map(|(t, d)| (t - d).norm() / (1.0 + d.norm()))
            .fold(0.0, f64::max);
        report.add(format!("coefficients[{i}]"), defect, c.tolerances.coefficients);
        let forms = engine.matrix_forms(&spectrum.ops, &grid, &chosen)?;
        let mat = forms
            .iter()
            .zip(&chosen)
            .map(|(m, &e)| (m.value - trace[e]).norm())
            .fold(0.0, f64::max);
        report.add(format!("matrix_form[{i}]"), mat, c.tolerances.matrix_form);
    }
    Ok(())
}

fn tilde_conv(exp: &Experiment, report: &mut Report) -> Result<()> {
    let c = &exp.config;
    let f1 = &c.functions[0];
    let f2 = c.functions.get(1).unwrap_or(f1);
    let grid = omega_grid(&exp.group, c.quadrature.grid);
    let orders = ConvOrders {
        group: exp.orders(c.quadrature.conv_group),
        action: exp.orders(c.quadrature.conv_action),
    };
    let (lhs, rhs) = tilde_conv_check(&f1.to_fn(), &f1.support(), &f2.to_fn(), &f2.support(), &exp.group, orders, &grid)?;
    let peak = lhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    report.add("tilde_conv", max_diff(&lhs, &rhs) / peak.max(f64::MIN_POSITIVE), c.tolerances.tilde_conv);
    Ok(())
}

fn plancherel_conv(exp: &Experiment, report: &mut Report) -> Result<()> {
    let c = &exp.config;
    let f = &c.functions[0];
    let basis = enumerate_basis(&exp.group, c.basis.k_max, c.basis.n_max);
    let triple = plancherel_via_conv(
        &f.to_fn(),
        &f.support(),
        &basis,
        &PlancherelSettings {
            spectral: exp.spectral(),
            coset_orders: c.quadrature.coset,
            action_orders: exp.orders(c.quadrature.conv_action),
        },
    )?;
    report.warn(triple.warning.clone(), "plancherel_conv");
    let d = triple.direct;
    let rel = |v: Complex64| (v - d).norm() / d.abs().max(f64::MIN_POSITIVE);
    report.add("plancherel_conv.via_conv", rel(triple.via_conv), c.tolerances.plancherel_conv);
    report.add("plancherel_conv.via_trace", rel(triple.via_trace), c.tolerances.plancherel_conv);
    report.add("plancherel_conv.conv_vs_trace", (triple.via_conv - triple.via_trace).norm() / d.abs().max(f64::MIN_POSITIVE), c.tolerances.plancherel_conv);
    report.add("plancherel_conv.imaginary", triple.via_trace.im.abs(), c.tolerances.imaginary);
    Ok(())
}
