//! Zero-mean Gaussian log-likelihoods: a dense reference and the exact
//! low-rank-plus-nugget evaluation.
//!
//! With `B` the `s × (N+1)^2` basis matrix, `F` a real factor of the
//! coefficient covariance (`Σ = F Fᵀ`) and `W = B F`, the observation
//! covariance is `σ² I + W Wᵀ`. Writing `M = σ² I + Wᵀ W`,
//!
//! ```text
//! log det = (s − r) log σ² + log det M
//! zᵀ Cov⁻¹ z = σ⁻² (zᵀz − (Wᵀz)ᵀ M⁻¹ (Wᵀz))
//! ```
//!
//! so one `r × r` factorization per evaluation suffices once `BᵀB` and
//! `Bᵀz` are stored.

use nalgebra::{DMatrix, DVector};

use crate::covariance::HarmonicCovariance;
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::geom::GeoPoint;
use crate::harmonics::basis::basis_matrix;
use crate::harmonics::legendre::NormalizedLegendre;
use crate::linalg::{chol_logdet, cholesky};
use crate::observation::Observation;

/// `FᵀBᵀBF`, the Cholesky factor of it plus the nugget, and `FᵀBᵀz`.
type Inner = (DMatrix<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>, DVector<f64>);

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// `−½ s log 2π − ½ log det C − ½ zᵀC⁻¹z` by dense Cholesky.
pub fn loglik_dense(cov: &DMatrix<f64>, values: &[f64]) -> Result<f64> {
    let s = values.len();
    if cov.nrows() != s || cov.ncols() != s {
        return Err(invalid("covariance size does not match the data"));
    }
    let ch = cholesky(cov.clone(), "covariance matrix")?;
    let z = DVector::from_column_slice(values);
    let a = ch.l().solve_lower_triangular(&z).expect("nonsingular factor");
    Ok(-0.5 * s as f64 * LN_2PI - 0.5 * chol_logdet(&ch) - 0.5 * a.norm_squared())
}

/// Log-likelihood of independent zero-mean normals with variance `v`.
pub fn white_noise_loglik(values: &[f64], v: f64) -> f64 {
    let s = values.len() as f64;
    let ss: f64 = values.iter().map(|z| z * z).sum();
    -0.5 * s * (LN_2PI + v.ln()) - 0.5 * ss / v
}

/// Data summaries for repeated low-rank likelihood evaluations.
#[derive(Clone, Debug)]
pub struct LowRankGaussian {
    truncation: usize,
    basis: DMatrix<f64>,
    gram: DMatrix<f64>,
    btz: DVector<f64>,
    ztz: f64,
    s: usize,
}

/// Value and gradient of the low-rank log-likelihood.
#[derive(Clone, Debug)]
pub struct LowRankEval {
    pub loglik: f64,
    /// `∂ℓ/∂F`.
    pub d_factor: DMatrix<f64>,
    /// `∂ℓ/∂σ²`.
    pub d_nugget: f64,
}

impl LowRankGaussian {
    pub fn new<S: NormalizedLegendre + ?Sized>(
        truncation: usize,
        points: &[GeoPoint],
        values: &[f64],
        source: &S,
        exec: Execution,
    ) -> Result<Self> {
        if points.len() != values.len() {
            return Err(invalid("one value per point required"));
        }
        if points.is_empty() {
            return Err(invalid("no observations"));
        }
        let basis = basis_matrix(truncation, points, source, exec)?;
        let z = DVector::from_column_slice(values);
        let gram = gram_matrix(&basis, exec);
        let btz = basis.tr_mul(&z);
        Ok(LowRankGaussian {
            truncation,
            gram,
            btz,
            ztz: values.iter().map(|v| v * v).sum(),
            s: values.len(),
            basis,
        })
    }

    pub fn from_observations<S: NormalizedLegendre + ?Sized>(
        truncation: usize,
        obs: &[Observation],
        source: &S,
        exec: Execution,
    ) -> Result<Self> {
        let pts: Vec<GeoPoint> = obs.iter().map(|o| o.point).collect();
        let vals: Vec<f64> = obs.iter().map(|o| o.value).collect();
        Self::new(truncation, &pts, &vals, source, exec)
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn len(&self) -> usize {
        self.s
    }

    pub fn is_empty(&self) -> bool {
        self.s == 0
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.ztz
    }

    fn inner(&self, f: &DMatrix<f64>, nugget: f64) -> Result<Inner> {
        if !(nugget > 0.0) {
            return Err(invalid("the low-rank likelihood needs a positive nugget"));
        }
        let h = f.tr_mul(&(&self.gram * f));
        let h = (&h + h.transpose()) * 0.5;
        let mut m = h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += nugget;
        }
        let ch = cholesky(m, "inner low-rank matrix")?;
        let wtz = f.tr_mul(&self.btz);
        Ok((h, ch, wtz))
    }

    /// Log-likelihood for factor `F` and nugget `σ² > 0`.
    pub fn loglik(&self, f: &DMatrix<f64>, nugget: f64) -> Result<f64> {
        let (_, ch, wtz) = self.inner(f, nugget)?;
        let r = f.ncols();
        let u = ch.solve(&wtz);
        let quad = (self.ztz - wtz.dot(&u)) / nugget;
        let logdet = (self.s as f64 - r as f64) * nugget.ln() + chol_logdet(&ch);
        Ok(-0.5 * self.s as f64 * LN_2PI - 0.5 * logdet - 0.5 * quad)
    }

    /// Log-likelihood with gradients with respect to `F` and `σ²`.
    pub fn loglik_grad(&self, f: &DMatrix<f64>, nugget: f64) -> Result<LowRankEval> {
        let (h, ch, wtz) = self.inner(f, nugget)?;
        let r = f.ncols();
        let s = self.s as f64;
        let u = ch.solve(&wtz);
        let quad = (self.ztz - wtz.dot(&u)) / nugget;
        let logdet = (s - r as f64) * nugget.ln() + chol_logdet(&ch);
        let loglik = -0.5 * s * LN_2PI - 0.5 * logdet - 0.5 * quad;

        // Bᵀ Cov⁻¹ B and Bᵀ Cov⁻¹ z
        let gf = &self.gram * f;
        let minv_fg = ch.solve(&gf.transpose());
        let bcb = (&self.gram - &gf * &minv_fg) / nugget;
        let bcz = (&self.btz - &gf * &u) / nugget;
        let d = (&bcz * bcz.transpose() - bcb) * 0.5;
        let d_factor = (&d + d.transpose()) * f;

        let minv_h = ch.solve(&h);
        let tr_cinv = (s - minv_h.trace()) / nugget;
        let cz_sq = (self.ztz - 2.0 * u.dot(&wtz) + u.dot(&(&h * &u))) / (nugget * nugget);
        let d_nugget = -0.5 * (tr_cinv - cz_sq);
        Ok(LowRankEval {
            loglik,
            d_factor,
            d_nugget,
        })
    }

    /// Log-likelihood of a harmonic model.
    pub fn loglik_model(&self, model: &HarmonicCovariance) -> Result<f64> {
        if model.truncation() != self.truncation {
            return Err(invalid("model truncation does not match the basis"));
        }
        self.loglik(&model.sigma_factor(), model.nugget())
    }
}

fn gram_matrix(b: &DMatrix<f64>, exec: Execution) -> DMatrix<f64> {
    const CHUNK: usize = 1024;
    let starts: Vec<usize> = (0..b.nrows()).step_by(CHUNK).collect();
    let parts = exec.map(&starts, |&st| {
        let e = (st + CHUNK).min(b.nrows());
        let rows = b.rows(st, e - st);
        rows.tr_mul(&rows)
    });
    let mut g = DMatrix::zeros(b.ncols(), b.ncols());
    for p in parts {
        g += p;
    }
    g
}

/// Low-rank log-likelihood of residual observations under a harmonic model,
/// with Legendre values from the direct recurrence.
pub fn loglik_lowrank(model: &HarmonicCovariance, obs: &[Observation], exec: Execution) -> Result<f64> {
    if !(model.nugget() > 0.0) {
        return Err(invalid("the low-rank likelihood needs a positive nugget"));
    }
    let lr = LowRankGaussian::from_observations(
        model.truncation(),
        obs,
        &crate::harmonics::legendre::Recurrence,
        exec,
    )?;
    lr.loglik_model(model)
}
