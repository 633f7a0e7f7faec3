#![allow(dead_code)]

use axisym::{GeoPoint, HarmonicCovariance, Observation, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random lower-triangular factors with entries in [-scale, scale]; real
/// blocks when `real` is set.
pub fn random_model(truncation: usize, scale: f64, nugget: f64, real: bool, seed: u64) -> HarmonicCovariance {
    let mut r = rng(seed);
    let factors = (0..=truncation)
        .map(|m| {
            let d = truncation + 1 - m;
            DMatrix::from_fn(d, d, |i, j| {
                if j > i {
                    C64::new(0.0, 0.0)
                } else if i == j || m == 0 || real {
                    C64::new(scale * r.random_range(-1.0..1.0), 0.0)
                } else {
                    C64::new(scale * r.random_range(-1.0..1.0), scale * r.random_range(-1.0..1.0))
                }
            })
        })
        .collect();
    HarmonicCovariance::new(truncation, factors, nugget).unwrap()
}

/// Points uniform on the sphere.
pub fn uniform_points(n: usize, seed: u64) -> Vec<GeoPoint> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let z: f64 = r.random_range(-1.0..1.0);
            let lon: f64 = r.random_range(-180.0..180.0);
            GeoPoint::new(z.asin().to_degrees(), lon).unwrap()
        })
        .collect()
}

pub fn observations(points: &[GeoPoint], values: &[f64]) -> Vec<Observation> {
    points
        .iter()
        .zip(values)
        .enumerate()
        .map(|(i, (p, v))| Observation::new(0, i as f64, *p, *v).unwrap())
        .collect()
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Legendre polynomial P_n(x) by the three-term recurrence.
pub fn legendre_p(n: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return 1.0;
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}
