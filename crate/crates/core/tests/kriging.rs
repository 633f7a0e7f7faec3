mod common;

use axisym::kriging::{krige_dense, krige_residuals, level25_product, read_product, write_product, ProductConfig};
use axisym::observation::group_orbits;
use axisym::simulate::{simulate_swaths, SwathConfig};
use axisym::{CovarianceModel, Execution, ExpChordalModel, MeanModel, Observation};
use common::{observations, random_model, rng, uniform_points};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn predictions_are_linear_in_the_data(seed in 0u64..10_000) {
        let model = CovarianceModel::Harmonic(random_model(3, 1.0, 0.2, false, seed));
        let pts = uniform_points(60, seed + 1);
        let targets = uniform_points(10, seed + 2);
        let mut r = rng(seed + 3);
        let z1: Vec<f64> = (0..60).map(|_| r.random_range(-1.0..1.0)).collect();
        let z2: Vec<f64> = (0..60).map(|_| r.random_range(-1.0..1.0)).collect();
        let sum: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| a + b).collect();
        let k = |z: &[f64]| krige_residuals(&model, &observations(&pts, z), &targets, Execution::Sequential).unwrap();
        let (a, b, c) = (k(&z1), k(&z2), k(&sum));
        for j in 0..targets.len() {
            prop_assert!((a.predictions[j] + b.predictions[j] - c.predictions[j]).abs() < 1e-10);
            prop_assert!(a.variances[j] >= 0.0);
            prop_assert_eq!(a.variances[j], c.variances[j]);
        }
    }
}

#[test]
fn vanishing_nugget_interpolates_the_data() {
    let pts = uniform_points(80, 5);
    let mut r = rng(6);
    let z: Vec<f64> = (0..80).map(|_| r.random_range(-1.0..1.0)).collect();
    let obs = observations(&pts, &z);
    let mut last = f64::INFINITY;
    for nugget in [1e-4, 1e-6, 1e-8] {
        let model = ExpChordalModel::new(1.0, 0.3, nugget).unwrap();
        let k = krige_dense(&model, &obs, &pts[..10], Execution::Parallel).unwrap();
        let err = (0..10).map(|i| (k.predictions[i] - z[i]).abs()).fold(0.0, f64::max);
        assert!(err < last);
        last = err;
        assert!(k.variances.iter().all(|v| *v >= 0.0 && *v <= 2.0 * nugget));
    }
    assert!(last < 1e-6, "{last}");
}

#[test]
fn harmonic_paths_agree_through_dispatch() {
    let model = random_model(4, 1.0, 0.3, false, 7);
    let pts = uniform_points(120, 8);
    let z: Vec<f64> = (0..120).map(|i| (i as f64 * 0.37).sin()).collect();
    let obs = observations(&pts, &z);
    let targets = uniform_points(15, 9);
    let low = krige_residuals(&CovarianceModel::Harmonic(model.clone()), &obs, &targets, Execution::Parallel).unwrap();
    let dense = krige_dense(&model, &obs, &targets, Execution::Parallel).unwrap();
    for j in 0..15 {
        assert!((low.predictions[j] - dense.predictions[j]).abs() < 1e-9);
        assert!((low.variances[j] - dense.variances[j]).abs() < 1e-9);
    }
}

#[test]
fn level25_product_on_synthetic_swaths() {
    let truth = random_model(4, 0.05, 2e-4, false, 10);
    let cfg = SwathConfig { scans: 400, cross_track: 11, ..SwathConfig::default() };
    let obs = simulate_swaths(&truth, &cfg, 3, true, 10, Execution::Parallel).unwrap();
    let orbits = group_orbits(&obs);
    let model = CovarianceModel::Harmonic(truth);
    let mean = MeanModel::zeros();
    let product = ProductConfig::default();
    let (recs, notices) = level25_product(&orbits, &model, &mean, &product, Execution::Parallel).unwrap();
    assert!(notices.is_empty());
    assert!(!recs.is_empty());
    for w in recs.windows(2) {
        assert!((w[0].orbit_id, w[0].point.lat(), w[0].point.lon()) <= (w[1].orbit_id, w[1].point.lat(), w[1].point.lon()));
    }
    for r in &recs {
        assert!(r.predicted_median_du > 0.0 && r.pred_variance_log >= 0.0);
        assert!((-62.5..=-57.5).contains(&r.point.lat()));
    }
    let seq = level25_product(&orbits, &model, &mean, &product, Execution::Sequential).unwrap();
    assert_eq!(seq.0, recs);

    let mut buf = Vec::new();
    write_product(&mut buf, &recs).unwrap();
    let back = read_product(buf.as_slice()).unwrap();
    assert_eq!(back.len(), recs.len());

    let only: Vec<Observation> = obs.iter().filter(|o| o.orbit_id == 1).copied().collect();
    let single = ProductConfig { include: Some(vec![1]), ..ProductConfig::default() };
    let (one, _) = level25_product(&group_orbits(&only), &model, &mean, &single, Execution::Parallel).unwrap();
    assert_eq!(one, recs.iter().filter(|r| r.orbit_id == 1).copied().collect::<Vec<_>>());
}
