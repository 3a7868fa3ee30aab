//! The invariant suite behind `lcl selfcheck`.

use lcl_core::eigen::sym_eig;
use lcl_core::landau::{
    eigen_residual, radial_basis, toeplitz_matrix, AngularSign, BasisIndex, LandauConfig, RESIDUAL_THRESHOLD,
};
use lcl_core::measures::{trace_functional, LimitingMeasure, Method, TestFunction};
use lcl_core::potentials::{mean_value_radial_profile, mean_value_transform, PotentialModel};
use lcl_core::report::{fmt_f64, CsvTable};
use lcl_core::specfun::{integrate_with_breaks, laguerre_bessel_gap, legendre_rule, ln_gamma, Tolerance};
use lcl_core::symbols::{i_rho, scaled_symbol_identity};
use lcl_core::{Error, Point};
use serde::Serialize;
use serde_json::json;

use crate::commands::Outcome;
use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Measured deviation or value.
    pub value: f64,
    pub tolerance: f64,
}

fn below(name: &'static str, value: f64, tolerance: f64) -> Check {
    Check {
        name,
        passed: value < tolerance,
        value,
        tolerance,
    }
}

fn flag(name: &'static str, ok: bool) -> Check {
    Check {
        name,
        passed: ok,
        value: if ok { 1.0 } else { 0.0 },
        tolerance: 1.0,
    }
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal `(d, e)`.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut p = 1.0;
    for i in 0..d.len() {
        let off = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] };
        p = d[i] - x - if i == 0 { 0.0 } else { off / p };
        if p == 0.0 {
            p = -1e-300;
        }
        if p < 0.0 {
            count += 1;
        }
    }
    count
}

fn sturm_eigenvalues(d: &[f64], e: &[f64]) -> Vec<f64> {
    let bound = d.iter().map(|x| x.abs()).sum::<f64>() + 2.0 * e.iter().map(|x| x.abs()).sum::<f64>();
    (0..d.len())
        .map(|j| {
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if sturm_count(d, e, mid) > j {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

fn quadrature_exactness() -> f64 {
    let rule = legendre_rule(20);
    (0..40)
        .map(|p| {
            let got = rule.integrate_on(0.0, 1.0, |x| x.powi(p));
            (got - 1.0 / (p as f64 + 1.0)).abs()
        })
        .fold(0.0, f64::max)
}

fn eigensolver_vs_sturm() -> anyhow::Result<f64> {
    let d = [2.0, -1.0, 0.5, 3.0, 1.25, -0.75];
    let e = [1.0, 0.3, -0.8, 0.45, 1.1];
    let n = d.len();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = d[i];
        if i + 1 < n {
            a[i * n + i + 1] = e[i];
            a[(i + 1) * n + i] = e[i];
        }
    }
    let got = sym_eig(&a, n)?.values;
    let want = sturm_eigenvalues(&d, &e);
    Ok(got.iter().zip(&want).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

fn basis_residual() -> anyhow::Result<f64> {
    let mut worst = 0.0f64;
    for (q, k) in [(0u32, 0i64), (2, -2), (3, 4), (5, -1), (8, 6)] {
        worst = worst.max(eigen_residual(BasisIndex::new(q, k)?, 1.0, AngularSign::Standard));
    }
    Ok(worst)
}

fn gram_deviation() -> anyhow::Result<f64> {
    let mut worst = 0.0f64;
    for k in [-2i64, 0, 3] {
        let qs = [3u32, 4, 5];
        for &q1 in &qs {
            for &q2 in &qs {
                let (i1, i2) = (BasisIndex::new(q1, k)?, BasisIndex::new(q2, k)?);
                let f = |r: f64| radial_basis(i1, 1.0, r) * radial_basis(i2, 1.0, r) * r;
                let breaks: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5).collect();
                let g = integrate_with_breaks(f, &breaks, Tolerance::new(1e-14, 1e-12))?.value;
                let want = if q1 == q2 { 1.0 } else { 0.0 };
                worst = worst.max((g - want).abs());
            }
        }
    }
    Ok(worst)
}

fn gaussian_trace() -> anyhow::Result<f64> {
    let model = PotentialModel::gaussian_bump(1.0, 1.0, 0.5);
    let mut worst = 0.0f64;
    for q in [0u32, 1, 2] {
        let block = toeplitz_matrix(&model, &LandauConfig::new(1.0, q, 80))?;
        worst = worst.max((block.trace() - 1.0).abs());
    }
    Ok(worst)
}

fn contraction() -> anyhow::Result<bool> {
    let model = PotentialModel::anisotropic(0.5, 0.3, 2);
    let block = toeplitz_matrix(&model, &LandauConfig::new(1.0, 4, 40))?;
    let spec = sym_eig(&block.to_dense()?, block.dimension())?;
    let top = spec.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(block.max_abs_entry() <= model.sup_abs() && top <= model.sup_abs())
}

fn mean_value_peak() -> anyhow::Result<f64> {
    let rho = 0.5f64;
    let closed =
        (-rho * 2f64.ln() + ln_gamma(0.5 * (1.0 - rho)) - 0.5 * std::f64::consts::PI.ln() - ln_gamma(1.0 - 0.5 * rho))
            .exp();
    let direct = mean_value_transform(&PotentialModel::isotropic(rho).tail(), Point::new(0.0, 1.0))?;
    let profile = mean_value_radial_profile(rho, 1.0)?;
    Ok((direct - closed).abs().max((profile - closed).abs()))
}

fn identity_deviation(cfg: &RunConfig) -> anyhow::Result<f64> {
    let mut worst = 0.0f64;
    for z in [
        Point::new(0.7, 1.9),
        Point::new(-3.1, 0.4),
        Point::new(5.0, -6.0),
        Point::new(0.2, -0.3),
    ] {
        let (l, r) = scaled_symbol_identity(&cfg.model, cfg.b, 2, z)?;
        worst = worst.max((l - r).abs());
    }
    Ok(worst)
}

fn lb_gap_sup() -> f64 {
    (0..=16u32)
        .flat_map(|q| (1..=100).map(move |i| laguerre_bessel_gap(q, 0.5 * i as f64).1.unwrap_or(0.0)))
        .fold(0.0, f64::max)
}

fn monte_carlo_reproducible(seed: u64) -> anyhow::Result<bool> {
    let phi = TestFunction::new(0.4, 0.2)?;
    let method = Method::MonteCarlo { seed, samples: 20_000 };
    let lim = LimitingMeasure::new(PotentialModel::isotropic(0.5), 1.0, method)?;
    Ok(lim.limiting_density_integral(&phi)?.to_bits() == lim.limiting_density_integral(&phi)?.to_bits())
}

fn certificate_enforced() -> anyhow::Result<bool> {
    let phi = TestFunction::new(0.3, 0.1)?;
    let spec = sym_eig(&[0.25], 1)?;
    let ok = trace_functional(&spec, 1.0, 0.5, &phi, Some(0.01))? == phi.eval(0.25);
    let refused = matches!(
        trace_functional(&spec, 1.0, 0.5, &phi, Some(0.5)),
        Err(Error::Contract(_))
    ) && matches!(trace_functional(&spec, 1.0, 0.5, &phi, None), Err(Error::Contract(_)));
    Ok(ok && refused)
}

fn mu_additivity() -> anyhow::Result<f64> {
    let lim = LimitingMeasure::new(PotentialModel::isotropic(0.5), 1.0, Method::RadialInversion)?;
    let whole = lim.mu_interval(0.3, 0.8)?;
    let parts = lim.mu_interval(0.3, 0.55)? + lim.mu_interval(0.55, 0.8)?;
    Ok((whole - parts).abs() / whole)
}

pub fn run_checks(cfg: &RunConfig) -> anyhow::Result<Vec<Check>> {
    Ok(vec![
        flag("config_valid", cfg.validate().is_ok()),
        below("quadrature_exactness", quadrature_exactness(), 1e-12),
        below("eigensolver_vs_sturm", eigensolver_vs_sturm()?, 1e-9),
        below("basis_eigen_residual", basis_residual()?, RESIDUAL_THRESHOLD),
        below("gram_orthonormality", gram_deviation()?, 1e-8),
        below("gaussian_trace_identity", gaussian_trace()?, 1e-6),
        flag("block_contraction", contraction()?),
        below("mean_value_peak_closed_form", mean_value_peak()?, 1e-10),
        below("scaled_symbol_identity", identity_deviation(cfg)?, 1e-7),
        below(
            "i_rho_rho2_limit",
            {
                let v = 1e3 * i_rho(1e3, 2.0)?;
                (v - std::f64::consts::FRAC_PI_2).abs() / std::f64::consts::FRAC_PI_2
            },
            0.01,
        ),
        below("laguerre_bessel_sup_finite", lb_gap_sup(), f64::MAX),
        flag("monte_carlo_reproducible", monte_carlo_reproducible(cfg.seed)?),
        flag("trace_certificate_enforced", certificate_enforced()?),
        below("mu_additivity", mu_additivity()?, 1e-9),
    ])
}

pub fn selfcheck(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let checks = run_checks(cfg)?;
    let mut t = CsvTable::new(&["name", "passed", "value", "tolerance"]);
    for c in &checks {
        t.push(vec![
            c.name.into(),
            c.passed.to_string(),
            fmt_f64(c.value),
            fmt_f64(c.tolerance),
        ]);
    }
    let passed: Vec<&str> = checks.iter().filter(|c| c.passed).map(|c| c.name).collect();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    Ok(Outcome {
        files: vec![("selfcheck.csv".into(), t.to_string())],
        passed: failed.is_empty(),
        results: json!({ "passed": passed, "failed": failed, "checks": checks }),
    })
}
