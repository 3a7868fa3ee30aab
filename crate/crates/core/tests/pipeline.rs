//! End-to-end properties of the block -> spectrum -> measure pipeline.

use lcl_core::eigen::{block_spectrum, jacobi_eigen, sym_eig};
use lcl_core::landau::{landau_level, toeplitz_matrix, truncated_block, LandauConfig};
use lcl_core::measures::{
    convergence_study, eigenvalue_counting, schatten_norm, trace_functional, EmpiricalClusterMeasure, LimitingMeasure,
    Method, SchattenIndex, TestFunction,
};
use lcl_core::potentials::PotentialModel;
use lcl_core::Error;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn cluster_confinement_up_to_q256() {
    // C is the q = 8 value with 10% headroom; the scaled cluster edge has a
    // shallow hump near q = 32 before settling.
    let model = PotentialModel::isotropic(0.5);
    let scaled_max = |q: u32| {
        let block = toeplitz_matrix(&model, &LandauConfig::new(1.0, q, 2)).unwrap();
        assert!(block.truncation_tail_bound < block.max_abs_entry());
        landau_level(1.0, q).powf(0.25) * block.max_abs_entry()
    };
    let c = 1.1 * scaled_max(8);
    for q in [16, 32, 64, 128, 256] {
        let v = scaled_max(q);
        assert!(v <= c, "q={q}: {v} > {c}");
        assert!((0.2..=5.0).contains(&v));
    }
}

#[test]
fn contraction_on_anisotropic_block() {
    let model = PotentialModel::anisotropic(0.5, 0.3, 2);
    let block = truncated_block(&model, 1.0, 8, 0.5, 32).unwrap();
    assert!(block.max_abs_entry() <= model.sup_abs());
    let spec = block_spectrum(&block).unwrap();
    assert!(max_abs(&spec.values) <= model.sup_abs() * (1.0 + 1e-12));
    assert!(spec.residual_bound < 1e-10);
}

#[test]
fn dense_solver_agrees_with_jacobi_on_a_real_block() {
    let model = PotentialModel::anisotropic(0.5, 0.3, 2);
    let block = toeplitz_matrix(&model, &LandauConfig::new(1.0, 6, 40)).unwrap();
    let n = block.dimension();
    let a = block.to_dense().unwrap();
    let spec = sym_eig(&a, n).unwrap();
    let (mut vals, _) = jacobi_eigen(&a, n);
    vals.sort_by(f64::total_cmp);
    for (x, y) in spec.values.iter().zip(&vals) {
        assert!((x - y).abs() < 1e-12, "{x} {y}");
    }
}

#[test]
fn trace_functional_ignores_discarded_rows() {
    let model = PotentialModel::isotropic(0.5);
    let phi = TestFunction::new(0.5, 0.3).unwrap();
    let q = 8;
    let lambda = landau_level(1.0, q);
    let block = truncated_block(&model, 1.0, q, 0.18, 32).unwrap();
    let spec = block_spectrum(&block).unwrap();
    let base = trace_functional(&spec, lambda, 0.5, &phi, Some(block.truncation_tail_bound)).unwrap();
    // Enlarge the section: the extra rows lie under the certified tail bound.
    let wider = toeplitz_matrix(&model, &LandauConfig::new(1.0, q, block.k_max + 500)).unwrap();
    let wide_spec = block_spectrum(&wider).unwrap();
    let wide = trace_functional(&wide_spec, lambda, 0.5, &phi, Some(wider.truncation_tail_bound)).unwrap();
    assert_eq!(base, wide);
    // Replace the discarded part by arbitrary values under the bound.
    let mut values = spec.values.clone();
    values.extend(
        (0..300).map(|i| block.truncation_tail_bound * (i as f64 / 300.0) * if i % 2 == 0 { 1.0 } else { -1.0 }),
    );
    let perturbed = lcl_core::eigen::EigenSpectrum {
        dimension: values.len(),
        values,
        residual_bound: 0.0,
    };
    assert_eq!(
        trace_functional(&perturbed, lambda, 0.5, &phi, Some(block.truncation_tail_bound)).unwrap(),
        base
    );
    // A test function reaching below the tail has no certificate.
    let low = TestFunction::new(0.1, 0.05).unwrap();
    assert!(matches!(
        trace_functional(&spec, lambda, 0.5, &low, Some(block.truncation_tail_bound)),
        Err(Error::Contract(_))
    ));
}

#[test]
fn counting_tracks_limiting_measure() {
    let model = PotentialModel::isotropic(0.5);
    let lim = LimitingMeasure::new(model, 1.0, Method::RadialInversion).unwrap();
    let (alpha, beta) = (0.4, 0.7);
    let mu = lim.mu_interval(alpha, beta).unwrap();
    let gaps: Vec<f64> = [8u32, 16, 32]
        .iter()
        .map(|&q| {
            let block = truncated_block(&model, 1.0, q, 0.35, 32).unwrap();
            let m = EmpiricalClusterMeasure::from_block(&block, 0.5).unwrap();
            let count = eigenvalue_counting(&m, alpha, beta).unwrap() as f64;
            (count / m.lambda_q - mu).abs() / mu
        })
        .collect();
    assert!(gaps[2] <= 0.15 && gaps[2] <= gaps[0], "{gaps:?}");
}

#[test]
fn negated_model_mirrors_the_trace_formula() {
    let phi = TestFunction::new(0.5, 0.3).unwrap();
    let neg_phi = TestFunction::new(-0.5, 0.3).unwrap();
    let m = PotentialModel::isotropic(0.5);
    let pos = convergence_study(&m, 1.0, &phi, &[4, 8], 0.18, Method::RadialInversion).unwrap();
    let neg = convergence_study(&m.scaled(-1.0), 1.0, &neg_phi, &[4, 8], 0.18, Method::RadialInversion).unwrap();
    for (p, n) in pos.iter().zip(&neg) {
        assert!((p.lhs - n.lhs).abs() <= 1e-12 * p.lhs);
        assert!((p.rhs - n.rhs).abs() <= 1e-12 * p.rhs);
    }
}

#[test]
fn schatten_bound_constant_is_stable() {
    // ||T_q||_l <= c lambda^{1/l - rho/2} (1 + ln lambda)^{1/l}, l = 6 > 2/rho.
    let model = PotentialModel::isotropic(0.5);
    let l = 6.0;
    let ratios: Vec<f64> = [8u32, 16, 32, 64, 128]
        .iter()
        .map(|&q| {
            let block = truncated_block(&model, 1.0, q, 0.18, 32).unwrap();
            let spec = block_spectrum(&block).unwrap();
            let lam = landau_level(1.0, q);
            schatten_norm(&spec, SchattenIndex::Strong(l)) / (lam.powf(1.0 / l - 0.25) * (1.0 + lam.ln()).powf(1.0 / l))
        })
        .collect();
    let c = ratios[0];
    for r in &ratios {
        assert!(*r <= 1.5 * c && *r >= c / 1.5, "{ratios:?}");
    }
    let weak: Vec<f64> = [8u32, 32]
        .iter()
        .map(|&q| {
            let block = truncated_block(&model, 1.0, q, 0.18, 32).unwrap();
            schatten_norm(&block_spectrum(&block).unwrap(), SchattenIndex::Weak(4.0))
        })
        .collect();
    assert!(weak.iter().all(|w| w.is_finite() && *w > 0.0));
}
