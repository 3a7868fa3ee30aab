//! Subcommand bodies. Each returns its output files in memory; the caller
//! writes them and the manifest once everything has finished.

use anyhow::Context;
use lcl_core::eigen::block_spectrum;
use lcl_core::landau::{landau_level, truncated_block};
use lcl_core::measures::{convergence_study, convergence_table, LimitingMeasure, Method};
use lcl_core::report::{fmt_f64, json_string, CsvTable};
use lcl_core::specfun::laguerre_bessel_gap;
use lcl_core::symbols::{hs_distance, i_rho, scaled_symbol_identity};
use lcl_core::{Error, Point};
use serde_json::{json, Value};

use crate::config::RunConfig;

pub struct Outcome {
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
    pub results: Value,
    /// False when an invariant checked by the subcommand failed.
    pub passed: bool,
}

impl Outcome {
    fn ok(files: Vec<(String, String)>, results: Value) -> Self {
        Outcome {
            files,
            results,
            passed: true,
        }
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn primary_method(cfg: &RunConfig) -> Method {
    if cfg.model.is_radial() {
        Method::RadialInversion
    } else {
        Method::Grid2d
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::RadialInversion => "radial-inversion",
        Method::Grid2d => "grid-2d",
        Method::MonteCarlo { .. } => "monte-carlo",
    }
}

pub fn spectrum(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let q = cfg.q_list()?[0];
    let block =
        truncated_block(&cfg.model, cfg.b, q, cfg.delta, cfg.quad_order_base).context("landau: block assembly")?;
    let spec = block_spectrum(&block).context("eigen: block spectrum")?;
    let lambda = landau_level(cfg.b, q);
    let scale = lambda.powf(0.5 * cfg.model.rho);
    let mut eig = CsvTable::new(&["index", "eigenvalue", "scaled_eigenvalue"]);
    for (i, e) in spec.values.iter().enumerate() {
        eig.push(vec![i.to_string(), fmt_f64(*e), fmt_f64(scale * e)]);
    }
    let mut block_csv = Vec::new();
    block.write_csv(&mut block_csv)?;
    let summary = block.summary();
    let results = json!({
        "q": q,
        "lambda_q": lambda,
        "k_max": block.k_max,
        "dimension": spec.dimension,
        "residual_bound": spec.residual_bound,
        "truncation_tail_bound": block.truncation_tail_bound,
        "scaled_min": scale * spec.values[0],
        "scaled_max": scale * spec.values[spec.values.len() - 1],
    });
    Ok(Outcome::ok(
        vec![
            ("block_summary.json".into(), json_string(&summary)?),
            ("block.csv".into(), String::from_utf8(block_csv)?),
            ("spectrum.csv".into(), eig.to_string()),
        ],
        results,
    ))
}

pub fn trace_sweep(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let method = primary_method(cfg);
    let rows = convergence_study(&cfg.model, cfg.b, &cfg.phi, cfg.q_list()?, cfg.delta, method)
        .context("measures: convergence study")?;
    let last = rows[rows.len() - 1];
    let results = json!({
        "rhs_method": method_name(method),
        "rhs": last.rhs,
        "rel_gap_first": rows[0].rel_gap,
        "rel_gap_last": last.rel_gap,
        "rel_gap_not_larger_at_last": last.rel_gap <= rows[0].rel_gap,
    });
    Ok(Outcome::ok(
        vec![("trace_sweep.csv".into(), convergence_table(&rows).to_string())],
        results,
    ))
}

pub const HS_Q: [u32; 4] = [4, 8, 16, 32];
pub const IDENTITY_Q: [u32; 3] = [2, 8, 32];

/// Supremum of the normalized Laguerre-Bessel gap over `q <= 64` on `points`
/// equispaced radii in `[0.01, 50]`, with the maximiser per `q`.
pub fn laguerre_bessel_scan(points: usize) -> Vec<(u32, f64, f64)> {
    (0..=64u32)
        .map(|q| {
            (0..points)
                .map(|i| {
                    let r = 0.01 + (50.0 - 0.01) * i as f64 / (points - 1) as f64;
                    (q, laguerre_bessel_gap(q, r).1.unwrap_or(0.0), r)
                })
                .fold((q, 0.0, 0.0), |a, b| if b.1 > a.1 { (q, b.1, b.2) } else { a })
        })
        .collect()
}

/// Sample points for the rescaling identity: 8 angles on each of two circles.
pub fn identity_points(q: u32) -> Vec<Point> {
    let k = (2.0 * q as f64 + 1.0).sqrt();
    [0.6 * k, 2.2 * k]
        .iter()
        .flat_map(|&r| (0..8).map(move |i| Point::polar(r, 0.3 + i as f64 * std::f64::consts::FRAC_PI_4)))
        .collect()
}

pub fn symbol_check(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let mut files = Vec::new();
    let mut results = serde_json::Map::new();

    if cfg.model.is_radial() && cfg.model.kind != lcl_core::potentials::PotentialKind::CompactGaussianBump {
        let mut t = CsvTable::new(&["q", "lambda_q", "hs_distance", "r_max", "relative_tail"]);
        let (mut lam, mut hs) = (Vec::new(), Vec::new());
        for q in HS_Q {
            let h = hs_distance(&cfg.model, cfg.b, q).context("symbols: hs_distance")?;
            let l = landau_level(cfg.b, q);
            t.push(vec![
                q.to_string(),
                fmt_f64(l),
                fmt_f64(h.value),
                fmt_f64(h.r_max),
                fmt_f64(h.relative_tail),
            ]);
            lam.push(l);
            hs.push(h.value);
        }
        results.insert("hs_slope".into(), json!(log_log_slope(&lam, &hs)));
        files.push(("hs_distance.csv".into(), t.to_string()));
    } else {
        results.insert("hs_slope".into(), json!(null));
        results.insert(
            "hs_skipped".into(),
            json!("hs_distance needs a radial long-range model"),
        );
    }

    let scan = laguerre_bessel_scan(500);
    let fine = laguerre_bessel_scan(1000);
    let mut t = CsvTable::new(&["q", "sup_normalized_gap", "r_at_sup"]);
    for (q, v, r) in &scan {
        t.push(vec![q.to_string(), fmt_f64(*v), fmt_f64(*r)]);
    }
    let sup = scan.iter().map(|s| s.1).fold(0.0, f64::max);
    let sup_fine = fine.iter().map(|s| s.1).fold(0.0, f64::max);
    results.insert("lb_gap_sup".into(), json!(sup));
    results.insert("lb_gap_sup_refined".into(), json!(sup_fine));
    files.push(("lb_gap.csv".into(), t.to_string()));

    let mut t = CsvTable::new(&["rho", "k", "i_rho", "scaled", "limit", "rel_dev"]);
    for (rho, k) in [(0.3, 1e4), (0.5, 1e4), (0.7, 1e4), (2.0, 1e3)] {
        let v = i_rho(k, rho).context("symbols: i_rho")?;
        let (scaled, limit) = if rho < 1.0 {
            (k.powf(rho) * v, 1.0 / (1.0 - rho))
        } else {
            (k * v, std::f64::consts::FRAC_PI_2)
        };
        t.push(vec![
            fmt_f64(rho),
            fmt_f64(k),
            fmt_f64(v),
            fmt_f64(scaled),
            fmt_f64(limit),
            fmt_f64((scaled - limit).abs() / limit),
        ]);
    }
    files.push(("i_rho.csv".into(), t.to_string()));

    let mut t = CsvTable::new(&["q", "x", "y", "lhs", "rhs", "abs_diff"]);
    let mut worst = 0.0f64;
    for q in IDENTITY_Q {
        for z in identity_points(q) {
            let (l, r) = scaled_symbol_identity(&cfg.model, cfg.b, q, z).context("symbols: scaled identity")?;
            worst = worst.max((l - r).abs());
            t.push(vec![
                q.to_string(),
                fmt_f64(z.x),
                fmt_f64(z.y),
                fmt_f64(l),
                fmt_f64(r),
                fmt_f64((l - r).abs()),
            ]);
        }
    }
    results.insert("identity_max_abs_diff".into(), json!(worst));
    files.push(("identity.csv".into(), t.to_string()));
    Ok(Outcome::ok(files, Value::Object(results)))
}

pub fn measure(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let primary = primary_method(cfg);
    let mc = Method::MonteCarlo {
        seed: cfg.seed,
        samples: cfg.mc_samples,
    };
    let lim = |m| LimitingMeasure::new(cfg.model, cfg.b, m).context("measures: limiting measure");
    let (alpha, beta) = cfg.phi.support();
    let mut t = CsvTable::new(&["quantity", "method", "value"]);

    let integral = lim(primary)?
        .limiting_density_integral(&cfg.phi)
        .context("measures: limiting integral")?;
    let integral_mc = lim(mc)?
        .limiting_density_integral(&cfg.phi)
        .context("measures: limiting integral")?;
    t.push(vec![
        "limiting_density_integral".into(),
        method_name(primary).into(),
        fmt_f64(integral),
    ]);
    t.push(vec![
        "limiting_density_integral".into(),
        "monte-carlo".into(),
        fmt_f64(integral_mc),
    ]);

    // The radial inversion refuses level sets in the non-monotone band.
    let (mu_method, mu) = match lim(primary)?.mu_interval(alpha, beta) {
        Err(Error::Method(_)) => (Method::Grid2d, lim(Method::Grid2d)?.mu_interval(alpha, beta)),
        other => (primary, other),
    };
    let mu = mu.context("measures: mu_interval")?;
    let mu_mc = lim(mc)?.mu_interval(alpha, beta).context("measures: mu_interval")?;
    t.push(vec!["mu_interval".into(), method_name(mu_method).into(), fmt_f64(mu)]);
    t.push(vec!["mu_interval".into(), "monte-carlo".into(), fmt_f64(mu_mc)]);

    let rel = |a: f64, b: f64| {
        if a == b {
            0.0
        } else {
            (a - b).abs() / a.abs().max(1e-300)
        }
    };
    let results = json!({
        "interval": [alpha, beta],
        "integral": integral,
        "integral_monte_carlo": integral_mc,
        "integral_rel_diff": rel(integral, integral_mc),
        "mu_method": method_name(mu_method),
        "mu": mu,
        "mu_monte_carlo": mu_mc,
        "mu_rel_diff": rel(mu, mu_mc),
    });
    Ok(Outcome::ok(vec![("measure.csv".into(), t.to_string())], results))
}
