use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use se2_harmonic::conv_coset::{
    conv_coefficient, omega_grid, plancherel_via_conv, tilde_conv_check, ConvOrders, PlancherelSettings,
};
use se2_harmonic::coset_series::{
    ae_partial_sums, coefficient_trace, enumerate_basis, CoefficientTable, TableMetadata,
};
use se2_harmonic::crystal::{periodize, CosetQuadrature};
use se2_harmonic::group::GroupElement;
use se2_harmonic::spectra::{irrep_matrix, AngularModes};
use se2_harmonic::quadrature::build_se2_quadrature;
use se2_harmonic::Result;

use crate::config::Experiment;
use crate::output::{num, write_json, Table};
use crate::{Options, Outcome};

#[derive(Serialize)]
struct Meta<'a, T: Serialize> {
    command: &'a str,
    config: crate::config::ExperimentConfig,
    #[serde(flatten)]
    extra: T,
}

fn meta<'a, T: Serialize>(command: &'a str, exp: &Experiment, extra: T) -> Meta<'a, T> {
    Meta {
        command,
        config: exp.expanded(),
        extra,
    }
}

/// Per-frequency HS norms of `f̂(p)` and the interior unitarity defect of
/// `U_p` at the edge of each support.
pub fn transform(exp: &Experiment, opts: &Options) -> Result<Outcome> {
    let settings = exp.spectral();
    let grid = settings.grid()?;
    let mut table = Table::new(&["function", "p", "hs_norm", "interior_hs_norm", "unitarity_defect"]);
    let mut outcome = Outcome::default();
    let mut tails = Vec::new();
    for (i, f) in exp.config.functions.iter().enumerate() {
        let support = f.support();
        let region = support.bounding_region();
        let q = build_se2_quadrature(&region, settings.transform_orders)?;
        let spectrum = AngularModes::sample(|g| f.eval(g), &q, settings.band)?.spectrum(&grid, settings.tail_tol)?;
        let probe = GroupElement::new(support.reach(), 0.0, 1.0);
        for op in &spectrum.ops {
            let u = irrep_matrix(op.p, &probe, settings.band)?;
            let defect = u.mul(&u.adjoint()).interior_identity_defect();
            table.row(vec![
                i.to_string(),
                num(op.p),
                num(op.hs_norm()),
                num(op.interior_hs_norm()),
                num(defect),
            ]);
        }
        if let Some(w) = spectrum.tail.warning() {
            outcome.warnings.push(format!("functions[{i}]: {w}"));
        }
        tails.push(spectrum.tail);
    }
    table.write(&opts.out, "transform.csv")?;
    write_json(&opts.out, "transform.json", &meta("transform", exp, json!({ "rows": table.len(), "tails": tails })))?;
    Ok(outcome)
}

/// Coefficient tables by the trace formula, reconstruction errors on the
/// `Ω` grid, the Parseval defect and `Σ|c_ℓ| ‖ψ_ℓ‖_∞` partial sums.
pub fn series(exp: &Experiment, opts: &Options) -> Result<Outcome> {
    let c = &exp.config;
    let settings = exp.spectral();
    let basis = enumerate_basis(&exp.group, c.basis.k_max, c.basis.n_max);
    let cq = CosetQuadrature::new(&exp.group, c.quadrature.coset)?;
    let grid = omega_grid(&exp.group, c.quadrature.grid);
    let mut outcome = Outcome::default();
    let mut summary = Vec::new();
    for (i, f) in c.functions.iter().enumerate() {
        let support = f.support();
        let trace = coefficient_trace(&f.to_fn(), &support, &basis, &settings)?;
        if let Some(w) = &trace.warning {
            outcome.warnings.push(format!("functions[{i}]: {w}"));
        }
        let table = CoefficientTable::new(&basis, &trace.values).with_metadata(TableMetadata {
            crystal: exp.group.clone(),
            k_max: c.basis.k_max,
            n_max: c.basis.n_max,
            method: "trace".into(),
            spectral: Some(settings.clone()),
            coset_orders: None,
            generator: serde_json::to_value(f)?,
        });
        table.save(&opts.out, &format!("coefficients_{i}"))?;

        let tilde = periodize(f.to_fn(), &support, &exp.group)?;
        let norm_sq = cq.norm_lp(&cq.sample(&tilde.function), 2.0).powi(2);
        let coeff_sq: f64 = trace.values.iter().map(|v| v.norm_sqr()).sum();
        let parseval = if norm_sq > 0.0 { (norm_sq - coeff_sq).abs() / norm_sq } else { coeff_sq };

        let mut rec = Table::new(&["x1", "x2", "theta", "exact_re", "exact_im", "series_re", "series_im", "abs_error"]);
        let mut max_err: f64 = 0.0;
        for g in &grid {
            let exact = tilde.eval(g);
            let approx = basis.synthesize(&trace.values, g);
            let err = (exact - approx).norm();
            max_err = max_err.max(err);
            rec.row(vec![
                num(g.x1),
                num(g.x2),
                num(g.theta()),
                num(exact.re),
                num(exact.im),
                num(approx.re),
                num(approx.im),
                num(err),
            ]);
        }
        rec.write(&opts.out, &format!("reconstruction_{i}.csv"))?;

        let mut ae = Table::new(&["shell", "partial_sum"]);
        for (r, s) in ae_partial_sums(&table, &basis)? {
            ae.row(vec![r.to_string(), num(s)]);
        }
        ae.write(&opts.out, &format!("ae_{i}.csv"))?;
        summary.push(json!({
            "function": i,
            "basis_size": basis.len(),
            "contributing": trace.gammas.len(),
            "norm_sq": norm_sq,
            "coefficient_norm_sq": coeff_sq,
            "parseval_defect": parseval,
            "max_reconstruction_error": max_err,
            "warning": trace.warning,
        }));
    }
    write_json(&opts.out, "series.json", &meta("series", exp, json!({ "functions": summary })))?;
    Ok(outcome)
}

/// `(f₁ ⋆ f₂)~` against `f̃₁ ⊘ f₂` on the `Ω` grid, the coefficients of
/// `f̃₁ ⊘ f₂`, and the three routes to `‖f̃₁‖²`.
pub fn convolve(exp: &Experiment, opts: &Options) -> Result<Outcome> {
    let c = &exp.config;
    let f1 = &c.functions[0];
    let f2 = c.functions.get(1).unwrap_or(f1);
    let settings = exp.spectral();
    let grid = omega_grid(&exp.group, c.quadrature.grid);
    let orders = ConvOrders {
        group: exp.orders(c.quadrature.conv_group),
        action: exp.orders(c.quadrature.conv_action),
    };
    let mut outcome = Outcome::default();
    let (lhs, rhs) = tilde_conv_check(&f1.to_fn(), &f1.support(), &f2.to_fn(), &f2.support(), &exp.group, orders, &grid)?;
    let mut t = Table::new(&["x1", "x2", "theta", "periodized_re", "periodized_im", "action_re", "action_im"]);
    for ((g, l), r) in grid.iter().zip(&lhs).zip(&rhs) {
        t.row(vec![num(g.x1), num(g.x2), num(g.theta()), num(l.re), num(l.im), num(r.re), num(r.im)]);
    }
    t.write(&opts.out, "oslash.csv")?;

    let basis = enumerate_basis(&exp.group, c.basis.k_max, c.basis.n_max);
    let coeffs = conv_coefficient(
        &f1.to_fn(),
        &f1.support(),
        &f2.to_fn(),
        &f2.support(),
        &basis,
        &settings,
        opts.swap_conv_order,
    )?;
    if let Some(w) = &coeffs.warning {
        outcome.warnings.push(format!("conv coefficients: {w}"));
    }
    CoefficientTable::new(&basis, &coeffs.values)
        .with_metadata(TableMetadata {
            crystal: exp.group.clone(),
            k_max: c.basis.k_max,
            n_max: c.basis.n_max,
            method: if opts.swap_conv_order { "conv-trace-swapped" } else { "conv-trace" }.into(),
            spectral: Some(settings.clone()),
            coset_orders: None,
            generator: json!({ "f1": f1, "f2": f2 }),
        })
        .save(&opts.out, "conv_coefficients")?;

    let plancherel = plancherel_via_conv(
        &f1.to_fn(),
        &f1.support(),
        &basis,
        &PlancherelSettings {
            spectral: settings,
            coset_orders: c.quadrature.coset,
            action_orders: exp.orders(c.quadrature.conv_action),
        },
    )?;
    if let Some(w) = &plancherel.warning {
        outcome.warnings.push(format!("plancherel: {w}"));
    }
    let peak = lhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let defect = max_diff(&lhs, &rhs) / if peak > 0.0 { peak } else { 1.0 };
    write_json(
        &opts.out,
        "convolve.json",
        &meta(
            "convolve",
            exp,
            json!({ "tilde_conv_defect": defect, "grid_points": grid.len(), "plancherel": plancherel }),
        ),
    )?;
    Ok(outcome)
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Every basis element with its character expansion.
pub fn basis(exp: &Experiment, opts: &Options) -> Result<Outcome> {
    let c = &exp.config;
    let basis = enumerate_basis(&exp.group, c.basis.k_max, c.basis.n_max);
    let mut t = Table::new(&["k1", "k2", "n", "char_k1", "char_k2", "char_n", "re", "im"]);
    for e in basis.elements() {
        for (r, a) in &e.terms {
            t.row(vec![
                e.index.k[0].to_string(),
                e.index.k[1].to_string(),
                e.index.n.to_string(),
                r.k[0].to_string(),
                r.k[1].to_string(),
                r.n.to_string(),
                num(a.re),
                num(a.im),
            ]);
        }
    }
    t.write(&opts.out, "basis.csv")?;
    write_json(
        &opts.out,
        "basis.json",
        &meta(
            "basis",
            exp,
            json!({
                "size": basis.len(),
                "mu_volume": exp.group.mu_volume(),
                "character_scale": basis.scale(),
            }),
        ),
    )?;
    Ok(Outcome::default())
}
