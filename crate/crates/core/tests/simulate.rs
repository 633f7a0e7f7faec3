mod common;

use axisym::simulate::{sample_coefficients, simulate_swaths, synthesize_complex, synthesize_field, SwathConfig};
use axisym::{Execution, GeoPoint, HarmonicCovariance, C64};
use common::{random_model, uniform_points};
use nalgebra::DMatrix;

/// Mean over fields of `½ (Z(L, ℓ) − Z(L, 0))²` for each offset.
fn empirical_gamma(model: &HarmonicCovariance, lat: f64, offsets: &[f64], fields: u64) -> Vec<f64> {
    let mut pts = vec![GeoPoint::new(lat, 0.0).unwrap()];
    pts.extend(offsets.iter().map(|&l| GeoPoint::new(lat, l).unwrap()));
    let mut acc = vec![0.0; offsets.len()];
    for f in 0..fields {
        let z = synthesize_field(&sample_coefficients(model, f), &pts, 0.0, 0, Execution::Sequential).unwrap();
        for (i, a) in acc.iter_mut().enumerate() {
            *a += 0.5 * (z[i + 1] - z[0]).powi(2);
        }
    }
    acc.iter().map(|a| a / fields as f64).collect()
}

#[test]
fn reversible_model_has_symmetric_semivariance() {
    let factors = random_model(4, 1.0, 0.0, true, 3).factors().to_vec();
    let model = HarmonicCovariance::new(4, factors, 0.0).unwrap();
    assert!(model.is_longitudinally_reversible(1e-12));
    let fields = 4000;
    for &lat in &[-50.0, 10.0] {
        let g = empirical_gamma(&model, lat, &[30.0, -30.0, 75.0, -75.0], fields);
        for (a, b, l) in [(g[0], g[1], 30.0), (g[2], g[3], 75.0)] {
            let want = model.gamma(lat, lat, l) - model.nugget();
            // Var(½ D²) = ½ γ² for D ~ N(0, 2γ); the two estimates are correlated, so bound each
            let se = (0.5 * want * want / fields as f64).sqrt();
            assert!((a - want).abs() < 4.0 * se && (b - want).abs() < 4.0 * se, "{lat} {l}: {a} {b} {want}");
        }
    }
}

#[test]
fn nonreversible_model_has_asymmetric_covariance() {
    let mut factors: Vec<DMatrix<C64>> = random_model(3, 1.0, 0.0, true, 4).factors().to_vec();
    factors[1][(1, 0)] = C64::new(0.3, 0.9);
    let model = HarmonicCovariance::new(3, factors, 0.0).unwrap();
    assert!(!model.is_longitudinally_reversible(1e-6));
    assert!((model.k(20.0, 35.0, 40.0) - model.k(20.0, 35.0, -40.0)).abs() > 1e-3);
}

#[test]
fn same_seed_same_output() {
    let model = random_model(5, 1.0, 0.1, false, 5);
    let pts = uniform_points(500, 6);
    let a = synthesize_field(&sample_coefficients(&model, 9), &pts, 0.1, 9, Execution::Sequential).unwrap();
    let b = synthesize_field(&sample_coefficients(&model, 9), &pts, 0.1, 9, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    let c = synthesize_field(&sample_coefficients(&model, 10), &pts, 0.1, 10, Execution::Parallel).unwrap();
    assert_ne!(a, c);
    let cfg = SwathConfig { scans: 50, ..SwathConfig::default() };
    let s1 = simulate_swaths(&model, &cfg, 2, true, 11, Execution::Sequential).unwrap();
    let s2 = simulate_swaths(&model, &cfg, 2, true, 11, Execution::Parallel).unwrap();
    assert_eq!(s1, s2);
}

#[test]
fn real_field_equals_full_complex_sum() {
    let model = random_model(6, 1.0, 0.0, false, 7);
    let draw = sample_coefficients(&model, 8);
    let pts = uniform_points(50, 9);
    let z = synthesize_field(&draw, &pts, 0.0, 0, Execution::Parallel).unwrap();
    for (p, v) in pts.iter().zip(&z) {
        let c = synthesize_complex(&draw, p);
        assert!(c.im.abs() < 1e-12 && (c.re - v).abs() < 1e-12);
    }
}
