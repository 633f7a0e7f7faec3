//! Numerical cross-checks run by the `verify` subcommand.

use std::io::Write;

use axisym::fitting::{loglik_dense, loglik_lowrank, wls_criterion, WlsProblem};
use axisym::harmonics::basis_matrix;
use axisym::harmonics::legendre::{legendre_assoc, legendre_norm, tri_index, tri_len};
use axisym::kriging::{krige_dense, krige_lowrank};
use axisym::nalgebra::DMatrix;
use axisym::simulate::{sample_coefficients, synthesize_field};
use axisym::{
    build_spline_table, central_angle, lon_diff, GeoPoint, HarmonicCovariance, NormalizedLegendre, Observation,
    Recurrence, SpatialCovariance, VariogramRecord, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{CmdResult, Ctx, Failure};

struct Check {
    name: &'static str,
    measured: f64,
    tolerance: f64,
}

fn random_model(rng: &mut ChaCha8Rng, truncation: usize, nugget: f64, real: bool) -> HarmonicCovariance {
    let factors = (0..=truncation)
        .map(|m| {
            let d = truncation + 1 - m;
            DMatrix::from_fn(d, d, |i, j| {
                if j > i {
                    C64::new(0.0, 0.0)
                } else if i == j || m == 0 || real {
                    C64::new(rng.random_range(-1.0..1.0), 0.0)
                } else {
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                }
            })
        })
        .collect();
    HarmonicCovariance::new(truncation, factors, nugget).expect("valid factors")
}

fn points(rng: &mut ChaCha8Rng, n: usize) -> Vec<GeoPoint> {
    (0..n)
        .map(|_| {
            let z: f64 = rng.random_range(-1.0..1.0);
            GeoPoint::new(z.asin().to_degrees(), rng.random_range(-180.0..180.0)).expect("valid point")
        })
        .collect()
}

fn simulate(ctx: &Ctx, model: &HarmonicCovariance, pts: &[GeoPoint], seed: u64) -> axisym::Result<Vec<Observation>> {
    let draw = sample_coefficients(model, seed);
    let z = synthesize_field(&draw, pts, model.nugget(), seed, ctx.exec)?;
    pts.iter().zip(z).enumerate().map(|(i, (p, v))| Observation::new(0, i as f64, *p, v)).collect()
}

fn likelihood(ctx: &Ctx, rng: &mut ChaCha8Rng) -> axisym::Result<f64> {
    let mut worst = 0.0f64;
    for (i, n) in [2, 4, 7].into_iter().enumerate() {
        let nugget = rng.random_range(0.1..1.0);
        let model = random_model(rng, n, nugget, i % 2 == 0);
        let pts = points(rng, 300);
        let obs = simulate(ctx, &model, &pts, rng.random())?;
        let values: Vec<f64> = obs.iter().map(|o| o.value).collect();
        let dense = loglik_dense(&model.dense_covariance(&pts, ctx.exec), &values)?;
        let low = loglik_lowrank(&model, &obs, ctx.exec)?;
        worst = worst.max((low - dense).abs() / dense.abs());
    }
    Ok(worst)
}

fn kriging(ctx: &Ctx, rng: &mut ChaCha8Rng) -> axisym::Result<f64> {
    let mut worst = 0.0f64;
    for (i, n) in [3, 5].into_iter().enumerate() {
        let nugget = rng.random_range(0.1..0.5);
        let model = random_model(rng, n, nugget, i == 0);
        let pts = points(rng, 200);
        let obs = simulate(ctx, &model, &pts, rng.random())?;
        let targets = points(rng, 25);
        let d = krige_dense(&model, &obs, &targets, ctx.exec)?;
        let l = krige_lowrank(&model, &obs, &targets, &Recurrence, ctx.exec)?;
        let scale = d.predictions.iter().fold(0.0f64, |a, p| a.max(p.abs()));
        for j in 0..targets.len() {
            worst = worst.max((d.predictions[j] - l.predictions[j]).abs() / scale);
            worst = worst.max((d.variances[j] - l.variances[j]).abs() / d.variances[j]);
        }
    }
    Ok(worst)
}

fn embedding(ctx: &Ctx, rng: &mut ChaCha8Rng) -> axisym::Result<f64> {
    let mut worst = 0.0f64;
    for n in [1, 4, 7] {
        let model = random_model(rng, n, 0.0, n == 4);
        let pts = points(rng, 60);
        let b = basis_matrix(n, &pts, &Recurrence, ctx.exec)?;
        let bsb = &b * model.sigma() * b.transpose();
        for (a, p) in pts.iter().enumerate() {
            for (c, q) in pts.iter().enumerate() {
                let k = model.k(p.lat(), q.lat(), lon_diff(p.lon(), q.lon())?);
                worst = worst.max((bsb[(a, c)] - k).abs());
            }
        }
    }
    Ok(worst)
}

fn addition_theorem(rng: &mut ChaCha8Rng) -> axisym::Result<f64> {
    let n_t = 7;
    let c: Vec<f64> = (0..=n_t).map(|_| rng.random_range(0.1..2.0)).collect();
    let factors = (0..=n_t)
        .map(|m| {
            DMatrix::from_fn(n_t + 1 - m, n_t + 1 - m, |i, j| C64::new(if i == j { c[m + i].sqrt() } else { 0.0 }, 0.0))
        })
        .collect();
    let model = HarmonicCovariance::new(n_t, factors, 0.0)?;
    let mut worst = 0.0f64;
    let (p, q) = (points(rng, 500), points(rng, 500));
    for (a, b) in p.iter().zip(&q) {
        let k = model.k(a.lat(), b.lat(), lon_diff(a.lon(), b.lon())?);
        let x = central_angle(a, b).to_radians().cos();
        let mut iso = 0.0;
        for (n, cn) in c.iter().enumerate() {
            iso += cn * (2 * n + 1) as f64 / 2.0 * legendre_assoc(n, 0, x)?;
        }
        worst = worst.max((k - iso).abs());
    }
    Ok(worst)
}

fn degeneracy(rng: &mut ChaCha8Rng) -> axisym::Result<f64> {
    let n_t = 5;
    let model = random_model(rng, n_t, 0.3, false);
    let mut factors = model.factors().to_vec();
    factors[0][(0, 0)] = C64::new(3.0, 0.0);
    let moved = HarmonicCovariance::new(n_t, factors, model.nugget())?;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (l1, l2, dl) = (rng.random_range(-90.0..90.0), rng.random_range(-90.0..90.0), rng.random_range(-180.0..180.0));
        worst = worst.max((model.gamma(l1, l2, dl) - moved.gamma(l1, l2, dl)).abs());
    }
    let records: Vec<VariogramRecord> = (0..300)
        .map(|_| {
            let (j, k) = (rng.random_range(0i64..10), rng.random_range(0i64..21));
            VariogramRecord {
                l0: rng.random_range(-70i64..80) as f64,
                j,
                k,
                mean_dlat: j as f64 + rng.random_range(0.0..1.0),
                mean_dlon: k as f64 + rng.random_range(0.0..1.0),
                gamma_hat: rng.random_range(0.0..2.0),
                count: rng.random_range(1..200),
            }
        })
        .collect();
    let problem = WlsProblem::new(records, n_t)?;
    worst = worst.max((wls_criterion(&model, &problem)? - wls_criterion(&moved, &problem)?).abs());
    Ok(worst)
}

fn spline() -> axisym::Result<f64> {
    let n_max = 7;
    let table = build_spline_table(n_max);
    let mut vals = vec![0.0; tri_len(n_max)];
    let mut worst = 0.0f64;
    for i in 0..=18_000 {
        let lat = -90.0 + i as f64 * 0.01;
        table.fill_at_latitude(n_max, lat, &mut vals);
        let x = lat.to_radians().sin();
        for n in 0..=n_max {
            for m in 0..=n {
                worst = worst.max((vals[tri_index(n, m)] - legendre_norm(n, m, x)?).abs());
            }
        }
    }
    Ok(worst)
}

pub(crate) fn run(ctx: &mut Ctx, seed: u64) -> CmdResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lib = |e: axisym::Error| Failure::Data(e.to_string());
    let checks = [
        Check { name: "likelihood low-rank vs dense (relative)", measured: likelihood(ctx, &mut rng).map_err(lib)?, tolerance: 1e-8 },
        Check { name: "kriging low-rank vs dense (relative)", measured: kriging(ctx, &mut rng).map_err(lib)?, tolerance: 1e-8 },
        Check { name: "real embedding B Sigma B' vs K", measured: embedding(ctx, &mut rng).map_err(lib)?, tolerance: 1e-10 },
        Check { name: "addition theorem", measured: addition_theorem(&mut rng).map_err(lib)?, tolerance: 1e-10 },
        Check { name: "constant-harmonic degeneracy", measured: degeneracy(&mut rng).map_err(lib)?, tolerance: 1e-12 },
        Check { name: "spline vs recurrence", measured: spline().map_err(lib)?, tolerance: 1e-6 },
    ];
    let io = |e: std::io::Error| Failure::Data(e.to_string());
    writeln!(ctx.out, "check\tresult\tmeasured\ttolerance").map_err(io)?;
    let mut failed = 0;
    for c in &checks {
        let ok = c.measured < c.tolerance;
        failed += usize::from(!ok);
        writeln!(ctx.out, "{}\t{}\t{:.3e}\t{:e}", c.name, if ok { "PASS" } else { "FAIL" }, c.measured, c.tolerance)
            .map_err(io)?;
    }
    if failed > 0 {
        return Err(Failure::Data(format!("{failed} check(s) failed")));
    }
    Ok(())
}
