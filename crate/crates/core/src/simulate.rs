//! Exact simulation from harmonic covariance models and synthetic swath
//! geometry.
//!
//! Random numbers come from ChaCha8. For a base `seed`, the coefficients of
//! wavenumber `m` use stream `m + 1`, and the nugget noise of point `i` uses
//! stream `2^40 + i`, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::covariance::HarmonicCovariance;
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::geom::GeoPoint;
use crate::harmonics::legendre::{tri_index, tri_len, NormalizedLegendre, Recurrence};
use crate::linalg::C64;
use crate::observation::Observation;

const POINT_STREAM_BASE: u64 = 1 << 40;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// One draw of the coefficients `Y_nm`, `m >= 0`; `Y_{n,-m}` is the conjugate.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientDraw {
    truncation: usize,
    /// `coefficients[m][n - m]`.
    coefficients: Vec<Vec<C64>>,
    seed: u64,
}

impl CoefficientDraw {
    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, n: usize, m: usize) -> C64 {
        self.coefficients[m][n - m]
    }

    pub fn coefficients(&self) -> &[Vec<C64>] {
        &self.coefficients
    }
}

/// `Y_m = A_m ξ` with `ξ` real standard normal for `m = 0` and complex
/// standard normal (independent parts of variance ½) for `m >= 1`.
pub fn sample_coefficients(model: &HarmonicCovariance, seed: u64) -> CoefficientDraw {
    let coefficients = model
        .factors()
        .iter()
        .enumerate()
        .map(|(m, a)| {
            let mut rng = stream(seed, m as u64 + 1);
            let d = a.nrows();
            let xi: Vec<C64> = (0..d)
                .map(|_| {
                    if m == 0 {
                        C64::new(StandardNormal.sample(&mut rng), 0.0)
                    } else {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                    }
                })
                .collect();
            (0..d)
                .map(|i| (0..=i).map(|j| a[(i, j)] * xi[j]).sum())
                .collect()
        })
        .collect();
    CoefficientDraw {
        truncation: model.truncation(),
        coefficients,
        seed,
    }
}

fn field_at(draw: &CoefficientDraw, leg: &[f64], lon_rad: f64) -> f64 {
    let mut z = 0.0;
    for (m, ys) in draw.coefficients.iter().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (k, y) in ys.iter().enumerate() {
            acc += y * leg[tri_index(m + k, m)];
        }
        if m == 0 {
            z += acc.re;
        } else {
            z += 2.0 * (acc * C64::from_polar(1.0, m as f64 * lon_rad)).re;
        }
    }
    z
}

/// Field values at `points` plus independent `N(0, nugget)` noise per point.
pub fn synthesize_field(
    draw: &CoefficientDraw,
    points: &[GeoPoint],
    nugget: f64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>> {
    if !(nugget.is_finite() && nugget >= 0.0) {
        return Err(invalid("nugget must be finite and >= 0"));
    }
    let n_t = draw.truncation;
    let sd = nugget.sqrt();
    let idx: Vec<usize> = (0..points.len()).collect();
    Ok(exec.map(&idx, |&i| {
        let p = &points[i];
        let mut leg = vec![0.0; tri_len(n_t)];
        Recurrence.fill_at_latitude(n_t, p.lat(), &mut leg);
        let mut z = field_at(draw, &leg, p.lon().to_radians());
        if sd > 0.0 {
            let e: f64 = StandardNormal.sample(&mut stream(seed, POINT_STREAM_BASE + i as u64));
            z += sd * e;
        }
        z
    }))
}

/// The full sum over `m = -N..=N` at one point, without the nugget. Its
/// imaginary part vanishes up to rounding.
pub fn synthesize_complex(draw: &CoefficientDraw, point: &GeoPoint) -> C64 {
    let n_t = draw.truncation as i64;
    let mut leg = vec![0.0; tri_len(draw.truncation)];
    Recurrence.fill_at_latitude(draw.truncation, point.lat(), &mut leg);
    let lon = point.lon().to_radians();
    let mut z = C64::new(0.0, 0.0);
    for m in -n_t..=n_t {
        let am = m.unsigned_abs() as usize;
        for n in am..=draw.truncation {
            let y = draw.get(n, am);
            let y = if m < 0 { y.conj() } else { y };
            z += y * C64::from_polar(1.0, m as f64 * lon) * leg[tri_index(n, am)];
        }
    }
    z
}

/// Geometry of synthetic polar-orbiting swaths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwathConfig {
    /// Orbit inclination in degrees.
    pub inclination_deg: f64,
    /// Orbit period in seconds.
    pub period_s: f64,
    /// Cross-track scan positions.
    pub cross_track: usize,
    /// Half-width of a scan as a great-circle angle in degrees.
    pub half_width_deg: f64,
    /// Scans per orbit over the sampled arc.
    pub scans: usize,
    /// Sampled arc of argument of latitude, degrees (−90 is the southernmost point).
    pub arc_start_deg: f64,
    pub arc_end_deg: f64,
    /// Longitude of the ascending node of orbit 0.
    pub node_lon_deg: f64,
}

impl Default for SwathConfig {
    fn default() -> Self {
        SwathConfig {
            inclination_deg: 99.0,
            period_s: 6250.0,
            cross_track: 35,
            half_width_deg: 25.0,
            scans: 400,
            arc_start_deg: -90.0,
            arc_end_deg: 90.0,
            node_lon_deg: 0.0,
        }
    }
}

const SIDEREAL_DAY_S: f64 = 86_164.1;

/// `(time, point)` of every scan position of orbit `index`.
pub fn swath_points(cfg: &SwathConfig, index: u32) -> Result<Vec<(f64, GeoPoint)>> {
    if cfg.scans < 2 || cfg.cross_track == 0 {
        return Err(invalid("need at least 2 scans and 1 cross-track position"));
    }
    let inc = cfg.inclination_deg.to_radians();
    let t0 = index as f64 * cfg.period_s;
    // nodes drift west with the Earth's rotation
    let node = cfg.node_lon_deg.to_radians() - 2.0 * std::f64::consts::PI * t0 / SIDEREAL_DAY_S;
    let mut out = Vec::with_capacity(cfg.scans * cfg.cross_track);
    for s in 0..cfg.scans {
        let u_deg = cfg.arc_start_deg + (cfg.arc_end_deg - cfg.arc_start_deg) * s as f64 / (cfg.scans - 1) as f64;
        let u = u_deg.to_radians();
        let t = t0 + cfg.period_s * (u_deg + 90.0) / 360.0;
        let rot = node - 2.0 * std::f64::consts::PI * (t - t0) / SIDEREAL_DAY_S;
        let r = [u.cos(), u.sin() * inc.cos(), u.sin() * inc.sin()];
        let nrm = [0.0, -inc.sin(), inc.cos()];
        for c in 0..cfg.cross_track {
            let beta = if cfg.cross_track == 1 {
                0.0
            } else {
                (-cfg.half_width_deg + 2.0 * cfg.half_width_deg * c as f64 / (cfg.cross_track - 1) as f64).to_radians()
            };
            let v: Vec<f64> = (0..3).map(|k| beta.cos() * r[k] + beta.sin() * nrm[k]).collect();
            let (x, y) = (v[0] * rot.cos() - v[1] * rot.sin(), v[0] * rot.sin() + v[1] * rot.cos());
            let lat = v[2].clamp(-1.0, 1.0).asin().to_degrees();
            let lon = y.atan2(x).to_degrees();
            out.push((t + c as f64 * 1e-3, GeoPoint::new(lat, lon)?));
        }
    }
    Ok(out)
}

/// Observations of a simulated field on consecutive synthetic orbits
/// `0..orbits`. Each orbit gets its own field draw when `independent` is set,
/// otherwise all share one draw.
pub fn simulate_swaths(
    model: &HarmonicCovariance,
    cfg: &SwathConfig,
    orbits: u32,
    independent: bool,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Observation>> {
    let mut out = Vec::new();
    let shared = sample_coefficients(model, seed);
    for o in 0..orbits {
        let pts = swath_points(cfg, o)?;
        let draw = if independent {
            sample_coefficients(model, seed.wrapping_add(o as u64 + 1))
        } else {
            shared.clone()
        };
        let geo: Vec<GeoPoint> = pts.iter().map(|p| p.1).collect();
        let vals = synthesize_field(&draw, &geo, model.nugget(), seed.wrapping_add(0x5eed + o as u64), exec)?;
        for ((t, p), v) in pts.into_iter().zip(vals) {
            out.push(Observation::new(o, t, p, v)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::tests::random_model;

    #[test]
    fn zero_model_gives_zero_field() {
        let m = HarmonicCovariance::zeros(4, 0.0).unwrap();
        let d = sample_coefficients(&m, 1);
        assert!(d.coefficients().iter().flatten().all(|y| *y == C64::new(0.0, 0.0)));
        let pts = vec![GeoPoint::new(10.0, 20.0).unwrap(); 5];
        assert!(synthesize_field(&d, &pts, 0.0, 3, Execution::Sequential).unwrap().iter().all(|z| *z == 0.0));
    }

    #[test]
    fn real_and_complex_paths_agree() {
        let m = random_model(5, 0.0, 3);
        let d = sample_coefficients(&m, 77);
        let pts: Vec<_> = (0..20).map(|i| GeoPoint::new(-85.0 + 8.5 * i as f64, -170.0 + 17.0 * i as f64).unwrap()).collect();
        let z = synthesize_field(&d, &pts, 0.0, 0, Execution::Sequential).unwrap();
        for (p, zr) in pts.iter().zip(&z) {
            let c = synthesize_complex(&d, p);
            assert!(c.im.abs() < 1e-13);
            assert!((c.re - zr).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_mode_independent() {
        let m = random_model(3, 0.1, 4);
        let pts: Vec<_> = swath_points(&SwathConfig::default(), 2).unwrap().into_iter().map(|p| p.1).collect();
        let d = sample_coefficients(&m, 9);
        let a = synthesize_field(&d, &pts, 0.1, 5, Execution::Sequential).unwrap();
        let b = synthesize_field(&d, &pts, 0.1, 5, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(sample_coefficients(&m, 9), d);
        assert_ne!(sample_coefficients(&m, 10), d);
    }

    #[test]
    fn swath_geometry() {
        let cfg = SwathConfig::default();
        let p = swath_points(&cfg, 0).unwrap();
        assert_eq!(p.len(), cfg.scans * cfg.cross_track);
        let max_lat = p.iter().map(|x| x.1.lat()).fold(f64::MIN, f64::max);
        let min_lat = p.iter().map(|x| x.1.lat()).fold(f64::MAX, f64::min);
        // ground track peaks at 180° − inclination, widened by the swath
        assert!(max_lat > 81.0 && min_lat < -81.0);
        assert!(p.windows(2).all(|w| w[0].0 < w[1].0));
        let q = swath_points(&cfg, 1).unwrap();
        assert!((p[0].1.lon() - q[0].1.lon()).abs() > 10.0);
    }
}
