//! Maximum likelihood for the white-noise, exponential-plus-nugget and
//! harmonic models.
//!
//! Every fit is compared with its white-noise boundary point (no spatial
//! term, nugget equal to the mean square) and the better of the two is
//! returned, so the maximized likelihood never falls below the white-noise
//! maximum.

use nalgebra::DMatrix;

use super::likelihood::{white_noise_loglik, LowRankGaussian};
use super::optimize::{minimize, OptimConfig, OptimResult};
use super::params::{FreeSubset, NuggetParam, ParamLayout};
use crate::covariance::{ExpChordalModel, HarmonicCovariance};
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::geom::{chordal_distance, GeoPoint};
use crate::harmonics::legendre::NormalizedLegendre;
use crate::linalg::{chol_logdet, cholesky};
use crate::observation::Observation;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Mean of squared values: the white-noise maximum likelihood variance for a
/// zero-mean process.
pub fn mle_white_noise(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("no observations"));
    }
    Ok(values.iter().map(|z| z * z).sum::<f64>() / values.len() as f64)
}

fn values_of(obs: &[Observation]) -> Vec<f64> {
    obs.iter().map(|o| o.value).collect()
}

/// Outcome of a likelihood maximization.
#[derive(Clone, Debug)]
pub struct MleFit<M> {
    pub model: M,
    pub loglik: f64,
    pub white_noise_loglik: f64,
    pub optim: OptimResult,
    /// True when the white-noise boundary beat the optimizer.
    pub boundary: bool,
    pub warning: bool,
    pub frozen: Vec<String>,
}

/// Dense log-likelihood of the exponential model and its gradient with
/// respect to `(log θ1, log θ2, log nugget)`.
fn exp_loglik(dist: &DMatrix<f64>, z: &nalgebra::DVector<f64>, t1: f64, t2: f64, nug: f64) -> Option<(f64, [f64; 3])> {
    let s = z.len();
    let e = dist.map(|d| (-d / t2).exp());
    let mut c = &e * t1;
    for i in 0..s {
        c[(i, i)] += nug;
    }
    let ch = cholesky(c, "covariance").ok()?;
    let alpha = ch.solve(z);
    let ll = -0.5 * s as f64 * LN_2PI - 0.5 * chol_logdet(&ch) - 0.5 * z.dot(&alpha);
    let cinv = ch.inverse();
    let de1 = &e * t1;
    let de2 = e.zip_map(dist, |ev, d| t1 * ev * d / t2);
    let grad_of = |dc: &DMatrix<f64>| 0.5 * (alpha.dot(&(dc * &alpha)) - cinv.component_mul(dc).sum());
    let g3 = 0.5 * nug * (alpha.norm_squared() - cinv.trace());
    Some((ll, [grad_of(&de1), grad_of(&de2), g3]))
}

/// Maximize the dense likelihood of `θ1 exp(−d/θ2)` plus a nugget, on log
/// scales. Starting points try several ranges.
pub fn mle_exp_nugget(obs: &[Observation], cfg: &OptimConfig) -> Result<MleFit<ExpChordalModel>> {
    if obs.len() < 3 {
        return Err(invalid("need at least 3 observations"));
    }
    let pts: Vec<GeoPoint> = obs.iter().map(|o| o.point).collect();
    let z = nalgebra::DVector::from_vec(values_of(obs));
    let s = pts.len();
    let dist = DMatrix::from_fn(s, s, |i, j| chordal_distance(&pts[i], &pts[j]));
    let v = mle_white_noise(z.as_slice())?;
    let wn = white_noise_loglik(z.as_slice(), v);
    let sf = s as f64;

    let objective = |x: &[f64]| match exp_loglik(&dist, &z, x[0].exp() * v, x[1].exp(), x[2].exp() * v) {
        Some((ll, g)) => (-ll / sf, g.iter().map(|gi| -gi / sf).collect()),
        None => (f64::NAN, vec![0.0; 3]),
    };

    let mut start: Option<([f64; 3], f64)> = None;
    for range in [0.01f64, 0.03, 0.1, 0.3, 1.0] {
        let x0 = [0.5f64.ln(), range.ln(), 0.5f64.ln()];
        let f0 = objective(&x0).0;
        if f0.is_finite() && start.is_none_or(|(_, b)| f0 < b) {
            start = Some((x0, f0));
        }
    }
    let (x0, _) = start.ok_or_else(|| invalid("no finite starting point"))?;
    let optim = minimize(objective, &x0, cfg);
    let ll = -optim.f * sf;
    let fitted = ExpChordalModel::new(optim.x[0].exp() * v, optim.x[1].exp(), optim.x[2].exp() * v)?;
    let boundary = !(ll >= wn);
    let (model, loglik) = if boundary {
        (ExpChordalModel::new(0.0, fitted.theta2, v)?, wn)
    } else {
        (fitted, ll)
    };
    Ok(MleFit {
        model,
        loglik,
        white_noise_loglik: wn,
        warning: !optim.status.converged(),
        optim,
        boundary,
        frozen: Vec::new(),
    })
}

/// Maximize the low-rank likelihood of a harmonic model over the factors and
/// a log nugget. With `freeze_a0_first_column` the first column of `A_0` is
/// set to zero and held there.
pub fn mle_harmonic<S: NormalizedLegendre + ?Sized>(
    obs: &[Observation],
    init: &HarmonicCovariance,
    freeze_a0_first_column: bool,
    source: &S,
    cfg: &OptimConfig,
    exec: Execution,
) -> Result<MleFit<HarmonicCovariance>> {
    if !(init.nugget() > 0.0) {
        return Err(invalid("initial nugget must be positive"));
    }
    let n_t = init.truncation();
    let lr = LowRankGaussian::from_observations(n_t, obs, source, exec)?;
    mle_harmonic_prepared(&lr, init, freeze_a0_first_column, cfg)
}

/// As [`mle_harmonic`] with the data summaries already built.
pub fn mle_harmonic_prepared(
    lr: &LowRankGaussian,
    init: &HarmonicCovariance,
    freeze_a0_first_column: bool,
    cfg: &OptimConfig,
) -> Result<MleFit<HarmonicCovariance>> {
    let n_t = init.truncation();
    if lr.truncation() != n_t {
        return Err(invalid("model truncation does not match the data basis"));
    }
    let layout = ParamLayout::new(n_t, NuggetParam::Log);
    let frozen = if freeze_a0_first_column { layout.a0_first_column() } else { Vec::new() };
    let sf = lr.len() as f64;
    let v = lr.sum_of_squares() / sf;
    if !(v > 0.0) {
        return Err(invalid("all values are zero"));
    }
    let pscale = v.sqrt();
    let nug = layout.nugget_index();
    let mut full = layout.to_params(init);
    for &i in &frozen {
        full[i] = 0.0;
    }
    // factor entries scaled by the data standard deviation; log nugget as is
    let scaled: Vec<f64> = full.iter().enumerate().map(|(i, &p)| if i == nug { p } else { p / pscale }).collect();
    let subset = FreeSubset::new(scaled, &frozen);
    let unscale = |x: &[f64]| -> Vec<f64> {
        subset.scatter(x).iter().enumerate().map(|(i, &p)| if i == nug { p } else { p * pscale }).collect()
    };
    let objective = |x: &[f64]| {
        let p = unscale(x);
        let f = layout.sigma_factor(&p);
        let nugget = layout.nugget_value(p[nug]);
        match lr.loglik_grad(&f, nugget) {
            Ok(ev) => {
                let mut g = layout.pull_back(&ev.d_factor);
                g[nug] = ev.d_nugget * nugget;
                let g: Vec<f64> = g
                    .iter()
                    .enumerate()
                    .map(|(i, &gi)| -gi / sf * if i == nug { 1.0 } else { pscale })
                    .collect();
                (-ev.loglik / sf, subset.restrict(&g))
            }
            Err(_) => (f64::NAN, vec![0.0; subset.free.len()]),
        }
    };
    let optim = minimize(objective, &subset.gather(), cfg);
    let fitted = layout.from_params(&unscale(&optim.x))?;
    let ll = -optim.f * sf;
    let wn = white_noise_loglik_from(lr, v);
    let boundary = !(ll >= wn);
    let (model, loglik) = if boundary {
        (HarmonicCovariance::zeros(n_t, v)?, wn)
    } else {
        (fitted, ll)
    };
    Ok(MleFit {
        model,
        loglik,
        white_noise_loglik: wn,
        warning: !optim.status.converged(),
        optim,
        boundary,
        frozen: frozen.iter().map(|&i| layout.name(i)).collect(),
    })
}

fn white_noise_loglik_from(lr: &LowRankGaussian, v: f64) -> f64 {
    let s = lr.len() as f64;
    -0.5 * s * (LN_2PI + v.ln()) - 0.5 * lr.sum_of_squares() / v
}

/// Default starting model: half the mean square as nugget and the other half
/// spread evenly over the diagonals of the factors. A column of a factor that
/// starts at zero has zero gradient and never moves, so every diagonal entry
/// starts positive.
pub fn default_harmonic_init(truncation: usize, values: &[f64]) -> Result<HarmonicCovariance> {
    let v = mle_white_noise(values)?;
    let dim = ((truncation + 1) * (truncation + 1)) as f64;
    // the sphere average of K(p, p) is tr Σ / 2
    let d = (v / dim).sqrt();
    let factors = (0..=truncation)
        .map(|m| {
            let n = truncation + 1 - m;
            let mut a = DMatrix::zeros(n, n);
            for i in 0..n {
                a[(i, i)] = crate::linalg::C64::new(d, 0.0);
            }
            a
        })
        .collect();
    HarmonicCovariance::new(truncation, factors, 0.5 * v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_examples() {
        assert_eq!(mle_white_noise(&[1.0, -1.0, 1.0]).unwrap(), 1.0);
        let a = mle_white_noise(&[0.3, -0.2, 0.7]).unwrap();
        let b = mle_white_noise(&[0.6, -0.4, 1.4]).unwrap();
        assert!((b - 4.0 * a).abs() < 1e-15);
        assert!(mle_white_noise(&[]).is_err());
    }

    #[test]
    fn exp_gradient_matches_finite_differences() {
        let pts: Vec<GeoPoint> = (0..30).map(|i| GeoPoint::new(-60.0 + i as f64 * 0.7, (i * 13 % 40) as f64).unwrap()).collect();
        let z = nalgebra::DVector::from_iterator(30, (0..30).map(|i| ((i * 7) as f64).sin()));
        let dist = DMatrix::from_fn(30, 30, |i, j| chordal_distance(&pts[i], &pts[j]));
        let x = [0.3f64, 0.1, 0.2];
        let f = |x: [f64; 3]| exp_loglik(&dist, &z, x[0].exp(), x[1].exp(), x[2].exp()).unwrap();
        let lx = [x[0].ln(), x[1].ln(), x[2].ln()];
        let (_, g) = f(lx);
        for k in 0..3 {
            let mut a = lx;
            a[k] += 1e-6;
            let mut b = lx;
            b[k] -= 1e-6;
            let fd = (f(a).0 - f(b).0) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-5 * (1.0 + fd.abs()), "{k}: {fd} {}", g[k]);
        }
    }
}
