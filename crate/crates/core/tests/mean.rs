mod common;

use axisym::harmonics::basis::mean_design_row;
use axisym::mean::fit_mean_zonal;
use axisym::{bin_average, fit_mean, residuals, BinAverage, MeanModel, Observation};
use common::{rng, uniform_points};
use rand::Rng;

fn synthetic(seed: u64) -> Vec<Observation> {
    let pts = uniform_points(12_000, seed);
    let mut r = rng(seed + 1);
    pts.iter()
        .enumerate()
        .map(|(i, p)| {
            let (l, g) = (p.lat().to_radians(), p.lon().to_radians());
            let v = 5.7 + 0.3 * l.sin().powi(2) - 0.1 * l.sin() + 0.05 * l.cos() * (2.0 * g).cos() + 0.02 * r.random_range(-1.0..1.0);
            Observation::new(0, i as f64, *p, v).unwrap()
        })
        .collect()
}

fn bin_sse(bins: &[BinAverage], model: &MeanModel) -> f64 {
    bins.iter().map(|b| (b.mean_value - model.evaluate(b.mean_lat, b.mean_lon)).powi(2)).sum()
}

#[test]
fn residuals_are_orthogonal_to_design() {
    let obs = synthetic(1);
    let bins = bin_average(&obs);
    let (model, report) = fit_mean(&bins, &obs).unwrap();
    assert!(report.r2_bins > 0.95);
    let rows: Vec<Vec<f64>> = bins.iter().map(|b| mean_design_row(b.mean_lat, b.mean_lon)).collect();
    let res: Vec<f64> = bins.iter().map(|b| b.mean_value - model.evaluate(b.mean_lat, b.mean_lon)).collect();
    for c in 0..rows[0].len() {
        let dot: f64 = rows.iter().zip(&res).map(|(x, e)| x[c] * e).sum();
        let scale = rows.iter().map(|x| x[c] * x[c]).sum::<f64>().sqrt() * res.iter().map(|e| e * e).sum::<f64>().sqrt();
        assert!(dot.abs() < 1e-6 * scale, "column {c}: {dot}");
    }
}

#[test]
fn perturbing_a_coefficient_never_helps() {
    let obs = synthetic(2);
    let bins = bin_average(&obs);
    let (model, _) = fit_mean(&bins, &[]).unwrap();
    let best = bin_sse(&bins, &model);
    for c in 0..model.coefficients().len() {
        for d in [-1e-3, 1e-3] {
            let mut coef = model.coefficients().to_vec();
            coef[c] += d;
            assert!(bin_sse(&bins, &MeanModel::new(coef).unwrap()) >= best);
        }
    }
}

#[test]
fn full_model_explains_at_least_the_zonal_one() {
    for seed in [3, 4] {
        let obs = synthetic(seed);
        let bins = bin_average(&obs);
        let (_, full) = fit_mean(&bins, &obs).unwrap();
        let (_, zonal) = fit_mean_zonal(&bins, &obs).unwrap();
        assert!(full.r2_bins >= zonal.r2_bins);
        assert!(full.r2_observations >= zonal.r2_observations - 1e-12);
    }
}

#[test]
fn residuals_subtract_the_surface() {
    let obs = synthetic(5);
    let (model, _) = fit_mean(&bin_average(&obs), &[]).unwrap();
    let res = residuals(&obs, &model);
    for (o, r) in obs.iter().zip(&res).take(100) {
        assert_eq!(r.value, o.value - model.evaluate(o.lat(), o.lon()));
        assert_eq!(r.point, o.point);
    }
}
