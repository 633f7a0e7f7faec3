//! Weighted least squares fits of harmonic covariance models to binned
//! variograms.
//!
//! A record `(L0, j, k, L̄, ℓ̄)` compares `γ̂` with the model semivariance
//! between `(L0 + ½, ℓ̄)` and `(L0 + ½ − L̄, 0)`, since offsets are first minus
//! second. With `δ = b(p) − b(q)` in the real basis,
//! `γ(p, q) = ½ δᵀΣδ + nugget`, which is linear in the blocks `C_m` and
//! quadratic in the factors `A_m`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::optimize::{minimize, OptimConfig, OptimResult};
use super::params::{FreeSubset, NuggetParam, ParamLayout};
use crate::covariance::HarmonicCovariance;
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::geom::{central_angle, GeoPoint};
use crate::harmonics::basis::{real_basis, BasisLayout};
use crate::harmonics::legendre::Recurrence;
use crate::linalg::{clip_to_psd, hermitian_eigenvalues, psd_cholesky, C64};
use crate::variogram::VariogramRecord;

/// Model arguments `(L, L2, dl)` of a record.
pub fn record_arguments(r: &VariogramRecord) -> (f64, f64, f64) {
    let lat1 = r.l0 + 0.5;
    (lat1, (lat1 - r.mean_dlat).clamp(-90.0, 90.0), r.mean_dlon)
}

/// `count / (angle between bin centers + 1°)`, with centers `(L0 + ½, 0)` and
/// `(L0 + ½ − (j + ½), k + ½)`.
pub fn wls_weights(records: &[VariogramRecord]) -> Vec<f64> {
    records
        .iter()
        .map(|r| {
            let lat1 = r.l0 + 0.5;
            let lat2 = (lat1 - (r.j as f64 + 0.5)).clamp(-90.0, 90.0);
            let p = GeoPoint::new(lat1, 0.0).expect("band latitude");
            let q = GeoPoint::new(lat2, r.k as f64 + 0.5).expect("bin latitude");
            r.count as f64 / (central_angle(&p, &q) + 1.0)
        })
        .collect()
}

/// Records, weights and truncation, with precomputed basis differences.
#[derive(Clone, Debug)]
pub struct WlsProblem {
    records: Vec<VariogramRecord>,
    weights: Vec<f64>,
    truncation: usize,
    deltas: DMatrix<f64>,
    distinct: Vec<bool>,
}

impl WlsProblem {
    /// Problem with the standard weights from [`wls_weights`].
    pub fn new(records: Vec<VariogramRecord>, truncation: usize) -> Result<Self> {
        let w = wls_weights(&records);
        Self::with_weights(records, w, truncation)
    }

    pub fn with_weights(records: Vec<VariogramRecord>, weights: Vec<f64>, truncation: usize) -> Result<Self> {
        if weights.len() != records.len() {
            return Err(invalid("one weight per record required"));
        }
        if records.is_empty() {
            return Err(invalid("no variogram records"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("weights must be positive"));
        }
        let dim = BasisLayout::new(truncation).dim();
        let mut deltas = DMatrix::zeros(records.len(), dim);
        let mut distinct = Vec::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            let (l1, l2, dl) = record_arguments(r);
            let b1 = real_basis(truncation, l1, dl, &Recurrence)?;
            let b2 = real_basis(truncation, l2, 0.0, &Recurrence)?;
            for c in 0..dim {
                deltas[(i, c)] = b1[c] - b2[c];
            }
            distinct.push(l1 != l2 || dl != 0.0);
        }
        Ok(WlsProblem {
            records,
            weights,
            truncation,
            deltas,
            distinct,
        })
    }

    pub fn records(&self) -> &[VariogramRecord] {
        &self.records
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Parameter indices held at zero: the first column of `A_0`.
    pub fn mask(&self) -> Vec<usize> {
        ParamLayout::new(self.truncation, NuggetParam::Square).a0_first_column()
    }

    fn gamma_scale(&self) -> f64 {
        let wsum: f64 = self.weights.iter().sum();
        let m = self.records.iter().zip(&self.weights).map(|(r, w)| w * r.gamma_hat).sum::<f64>() / wsum;
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }

    /// Criterion and `∂/∂F`, `∂/∂nugget` for a real factor `F`.
    fn eval_factor(&self, f: &DMatrix<f64>, nugget: f64, exec: Execution) -> (f64, DMatrix<f64>, f64) {
        const CHUNK: usize = 512;
        let n = self.records.len();
        let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
        let parts = exec.map(&starts, |&s| {
            let e = (s + CHUNK).min(n);
            let delta = self.deltas.rows(s, e - s);
            let t = delta * f;
            let mut u = t.clone();
            let mut crit = 0.0;
            let mut dnug = 0.0;
            for r in 0..(e - s) {
                let i = s + r;
                let g = 0.5 * t.row(r).norm_squared() + if self.distinct[i] { nugget } else { 0.0 };
                let res = self.records[i].gamma_hat - g;
                let w = self.weights[i];
                crit += w * res * res;
                if self.distinct[i] {
                    dnug -= 2.0 * w * res;
                }
                u.row_mut(r).scale_mut(-2.0 * w * res);
            }
            (crit, delta.transpose() * u, dnug)
        });
        let dim = f.nrows();
        let mut crit = 0.0;
        let mut df = DMatrix::zeros(dim, dim);
        let mut dnug = 0.0;
        for (c, d, g) in parts {
            crit += c;
            df += d;
            dnug += g;
        }
        (crit, df, dnug)
    }
}

/// `Σ w (γ̂ − γ_model)²`, evaluated with the model's own semivariance.
pub fn wls_criterion(model: &HarmonicCovariance, problem: &WlsProblem) -> Result<f64> {
    if model.truncation() != problem.truncation {
        return Err(invalid("model and problem truncations differ"));
    }
    Ok(problem
        .records
        .iter()
        .zip(&problem.weights)
        .map(|(r, w)| {
            let (l1, l2, dl) = record_arguments(r);
            let res = r.gamma_hat - model.gamma(l1, l2, dl);
            w * res * res
        })
        .sum())
}

/// Unconstrained linear least-squares solution over Hermitian blocks.
#[derive(Clone, Debug)]
pub struct LinearWlsFit {
    /// `C_0..C_N`; row and column 0 of `C_0` are zero.
    pub blocks: Vec<DMatrix<C64>>,
    pub nugget: f64,
    /// Most negative eigenvalue of each block (0 when none is negative).
    pub min_eigenvalues: Vec<f64>,
    pub criterion: f64,
    pub rank: usize,
    pub unknowns: usize,
    /// True when the system was rank deficient and a minimum-norm solution
    /// was returned.
    pub degenerate: bool,
}

#[derive(Clone, Copy, Debug)]
enum Unknown {
    Zonal(usize, usize),
    Re(usize, usize, usize),
    Im(usize, usize, usize),
    Nugget,
}

fn unknowns(truncation: usize) -> Vec<Unknown> {
    let mut out = Vec::new();
    for a in 1..=truncation {
        for b in a..=truncation {
            out.push(Unknown::Zonal(a, b));
        }
    }
    for m in 1..=truncation {
        let d = truncation + 1 - m;
        for a in 0..d {
            for b in a..d {
                out.push(Unknown::Re(m, a, b));
                if a < b {
                    out.push(Unknown::Im(m, a, b));
                }
            }
        }
    }
    out.push(Unknown::Nugget);
    out
}

fn feature(layout: &BasisLayout, delta: &[f64], distinct: bool, u: Unknown) -> f64 {
    match u {
        Unknown::Zonal(a, b) => {
            let (x, y) = (delta[a], delta[b]);
            if a == b {
                0.5 * x * x
            } else {
                x * y
            }
        }
        Unknown::Re(m, a, b) => {
            let (ua, ub) = (delta[layout.cos_index(m, m + a)], delta[layout.cos_index(m, m + b)]);
            let (va, vb) = (delta[layout.sin_index(m, m + a)], delta[layout.sin_index(m, m + b)]);
            if a == b {
                0.5 * (ua * ua + va * va)
            } else {
                ua * ub + va * vb
            }
        }
        Unknown::Im(m, a, b) => {
            let (ua, ub) = (delta[layout.cos_index(m, m + a)], delta[layout.cos_index(m, m + b)]);
            let (va, vb) = (delta[layout.sin_index(m, m + a)], delta[layout.sin_index(m, m + b)]);
            ua * vb - ub * va
        }
        Unknown::Nugget => {
            if distinct {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Exact weighted least-squares minimizer over unconstrained Hermitian blocks
/// and an unconstrained nugget.
pub fn wls_fit_linear(problem: &WlsProblem) -> Result<LinearWlsFit> {
    let n_t = problem.truncation;
    let layout = BasisLayout::new(n_t);
    let unk = unknowns(n_t);
    let rows = problem.records.len();
    let mut x = DMatrix::zeros(rows, unk.len());
    let mut y = DVector::zeros(rows);
    for i in 0..rows {
        let delta: Vec<f64> = problem.deltas.row(i).iter().copied().collect();
        let sw = problem.weights[i].sqrt();
        for (c, &u) in unk.iter().enumerate() {
            x[(i, c)] = sw * feature(&layout, &delta, problem.distinct[i], u);
        }
        y[i] = sw * problem.records[i].gamma_hat;
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = 1e-11 * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let theta = svd
        .solve(&y, eps)
        .map_err(|e| crate::error::Error::Factorization(e.to_string()))?;
    let resid = &y - &x * &theta;
    let criterion = resid.norm_squared();

    let mut blocks: Vec<DMatrix<C64>> = (0..=n_t).map(|m| DMatrix::zeros(n_t + 1 - m, n_t + 1 - m)).collect();
    let mut nugget = 0.0;
    for (&u, &v) in unk.iter().zip(theta.iter()) {
        match u {
            Unknown::Zonal(a, b) => {
                blocks[0][(a, b)] = C64::new(v, 0.0);
                blocks[0][(b, a)] = C64::new(v, 0.0);
            }
            Unknown::Re(m, a, b) => {
                blocks[m][(a, b)].re = v;
                blocks[m][(b, a)].re = v;
            }
            Unknown::Im(m, a, b) => {
                blocks[m][(a, b)].im = v;
                blocks[m][(b, a)].im = -v;
            }
            Unknown::Nugget => nugget = v,
        }
    }
    let min_eigenvalues = blocks
        .iter()
        .map(|c| hermitian_eigenvalues(c)[0].min(0.0))
        .collect();
    Ok(LinearWlsFit {
        blocks,
        nugget,
        min_eigenvalues,
        criterion,
        rank,
        unknowns: unk.len(),
        degenerate: rank < unk.len(),
    })
}

/// Starting model for [`wls_fit_psd`]: each block of the linear solution with
/// negative eigenvalues clipped to zero, then factored. A nonpositive nugget
/// is replaced by 1% of the weighted mean `γ̂`.
pub fn wls_initial_model(problem: &WlsProblem, linear: &LinearWlsFit) -> Result<HarmonicCovariance> {
    let blocks: Vec<_> = linear.blocks.iter().map(clip_to_psd).collect();
    let nugget = if linear.nugget > 0.0 {
        linear.nugget
    } else {
        0.01 * problem.gamma_scale()
    };
    let model = HarmonicCovariance::from_blocks(&blocks, nugget)?;
    drop_constant_harmonic(&model)
}

/// Equivalent model (same semivariance) whose `A_0` has a zero first column:
/// row and column 0 of `C_0` are set to zero and `A_0` is refactored.
pub fn drop_constant_harmonic(model: &HarmonicCovariance) -> Result<HarmonicCovariance> {
    let a0 = model.factor(0);
    if a0.column(0).iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Ok(model.clone());
    }
    let mut c0 = model.block(0).clone();
    c0.row_mut(0).fill(C64::new(0.0, 0.0));
    c0.column_mut(0).fill(C64::new(0.0, 0.0));
    let mut new_a0 = psd_cholesky(&c0, 1e-14)?;
    new_a0.iter_mut().for_each(|z| z.im = 0.0);
    new_a0.column_mut(0).fill(C64::new(0.0, 0.0));
    let mut factors = model.factors().to_vec();
    factors[0] = new_a0;
    HarmonicCovariance::new(model.truncation(), factors, model.nugget())
}

/// Result of a constrained fit.
#[derive(Clone, Debug)]
pub struct WlsFit {
    pub model: HarmonicCovariance,
    pub criterion: f64,
    pub initial_criterion: f64,
    /// Criterion trace of accepted iterates.
    pub optim: OptimResult,
    /// Names of the parameters held at zero.
    pub frozen: Vec<String>,
    /// Set when the optimizer stopped without meeting a convergence test.
    pub warning: bool,
}

/// Local minimizer of the criterion over the factors `A_m` (free diagonal
/// signs) and the nugget, with the first column of `A_0` held at zero.
pub fn wls_fit_psd(
    problem: &WlsProblem,
    init: &HarmonicCovariance,
    cfg: &OptimConfig,
    exec: Execution,
) -> Result<WlsFit> {
    if init.truncation() != problem.truncation {
        return Err(invalid("model and problem truncations differ"));
    }
    let init = drop_constant_harmonic(init)?;
    let layout = ParamLayout::new(problem.truncation, NuggetParam::Square);
    let mask = problem.mask();
    let mut full = layout.to_params(&init);
    for &i in &mask {
        full[i] = 0.0;
    }
    let scale = problem.gamma_scale();
    let pscale = scale.sqrt();
    let fscale = 1.0 / (scale * scale * problem.weights.iter().sum::<f64>());
    let subset = FreeSubset::new(full.iter().map(|v| v / pscale).collect(), &mask);
    let nug = layout.nugget_index();

    let objective = |x: &[f64]| {
        let p: Vec<f64> = subset.scatter(x).iter().map(|v| v * pscale).collect();
        let f = layout.sigma_factor(&p);
        let nugget = layout.nugget_value(p[nug]);
        let (crit, df, dnug) = problem.eval_factor(&f, nugget, exec);
        let mut g = layout.pull_back(&df);
        g[nug] = dnug * layout.nugget_derivative(p[nug]);
        let g: Vec<f64> = subset.restrict(&g).iter().map(|v| v * pscale * fscale).collect();
        (crit * fscale, g)
    };
    let x0 = subset.gather();
    let initial_criterion = objective(&x0).0 / fscale;
    let mut optim = minimize(objective, &x0, cfg);
    let p: Vec<f64> = subset.scatter(&optim.x).iter().map(|v| v * pscale).collect();
    for &i in &mask {
        debug_assert_eq!(p[i].to_bits(), 0.0f64.to_bits());
    }
    let model = layout.from_params(&p)?;
    optim.trace.iter_mut().for_each(|v| *v /= fscale);
    let criterion = optim.f / fscale;
    Ok(WlsFit {
        model,
        criterion,
        initial_criterion,
        warning: !optim.status.converged(),
        frozen: mask.iter().map(|&i| layout.name(i)).collect(),
        optim,
    })
}

/// The variogram table with the model semivariance at each record's
/// arguments appended as `gamma_model`.
pub fn write_gamma_grid<W: Write>(mut w: W, records: &[VariogramRecord], model: &HarmonicCovariance) -> Result<()> {
    writeln!(w, "L0\tj\tk\tmean_dlat\tmean_dlon\tgamma_hat\tgamma_model\tcount")?;
    for r in records {
        let (l1, l2, dl) = record_arguments(r);
        writeln!(
            w,
            "{:e}\t{}\t{}\t{:e}\t{:e}\t{:e}\t{:e}\t{}",
            r.l0,
            r.j,
            r.k,
            r.mean_dlat,
            r.mean_dlon,
            r.gamma_hat,
            model.gamma(l1, l2, dl),
            r.count
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(l0: f64, j: i64, k: i64, count: usize) -> VariogramRecord {
        VariogramRecord {
            l0,
            j,
            k,
            mean_dlat: j as f64 + 0.5,
            mean_dlon: k as f64 + 0.5,
            gamma_hat: 0.0,
            count,
        }
    }

    #[test]
    fn weight_examples() {
        // angle between (0.5, 0) and (0.5 - 0.5, 0.5): about 0.7071°
        let r = rec(0.0, 0, 0, 100);
        let p = GeoPoint::new(0.5, 0.0).unwrap();
        let q = GeoPoint::new(0.0, 0.5).unwrap();
        let w = wls_weights(&[r])[0];
        assert!((w - 100.0 / (central_angle(&p, &q) + 1.0)).abs() < 1e-12);
        // straight south by 4°: j + ½ = 4
        let mut r4 = rec(0.0, 0, 0, 100);
        r4.j = 3;
        r4.k = 0;
        let angle_row = {
            let q = GeoPoint::new(0.5 - 3.5, 0.5).unwrap();
            central_angle(&p, &q)
        };
        assert!((wls_weights(&[r4])[0] - 100.0 / (angle_row + 1.0)).abs() < 1e-12);
        let mut r2 = r4;
        r2.count = 200;
        assert_eq!(wls_weights(&[r2])[0], 2.0 * wls_weights(&[r4])[0]);
    }

    #[test]
    fn criterion_examples() {
        let model = crate::covariance::tests::random_model(2, 0.05, 1);
        let mut recs = Vec::new();
        for l0 in [-30.0, 0.0, 40.0] {
            for j in -3..3 {
                for k in -5..5 {
                    let mut r = rec(l0, j, k, 10);
                    let (a, b, l) = record_arguments(&r);
                    r.gamma_hat = model.gamma(a, b, l);
                    recs.push(r);
                }
            }
        }
        let prob = WlsProblem::new(recs.clone(), 2).unwrap();
        assert!(wls_criterion(&model, &prob).unwrap() < 1e-24);
        let mut one = recs[0];
        one.gamma_hat += 0.1;
        let prob = WlsProblem::with_weights(vec![one], vec![2.0], 2).unwrap();
        assert!((wls_criterion(&model, &prob).unwrap() - 0.02).abs() < 1e-14);
    }

    #[test]
    fn factor_path_matches_direct_criterion() {
        let model = crate::covariance::tests::random_model(3, 0.05, 4);
        let recs: Vec<_> = (0..60)
            .map(|i| {
                let mut r = rec(-70.0 + 10.0 * (i % 16) as f64, (i % 18) - 9, (i % 40) - 20, 5 + i as usize);
                r.mean_dlat = r.j as f64 + 0.3;
                r.mean_dlon = r.k as f64 + 0.7;
                r.gamma_hat = 0.01 * (i as f64).sin().abs();
                r
            })
            .collect();
        let prob = WlsProblem::new(recs, 3).unwrap();
        let (c, _, _) = prob.eval_factor(&model.sigma_factor(), model.nugget(), Execution::Sequential);
        let d = wls_criterion(&model, &prob).unwrap();
        assert!((c - d).abs() < 1e-12 * d.max(1e-300));
        let (cp, dfp, _) = prob.eval_factor(&model.sigma_factor(), model.nugget(), Execution::Parallel);
        let (cs, dfs, _) = prob.eval_factor(&model.sigma_factor(), model.nugget(), Execution::Sequential);
        assert_eq!(cp.to_bits(), cs.to_bits());
        assert_eq!(dfp, dfs);
    }

    #[test]
    fn dropping_constant_harmonic_keeps_gamma() {
        let model = crate::covariance::tests::random_model(3, 0.05, 9);
        let dropped = drop_constant_harmonic(&model).unwrap();
        assert!(dropped.factor(0).column(0).iter().all(|z| z.re == 0.0));
        for &(a, b, l) in &[(10.0, -20.0, 30.0), (-60.0, -58.0, -4.0), (80.0, 71.0, 19.0)] {
            assert!((model.gamma(a, b, l) - dropped.gamma(a, b, l)).abs() < 1e-12);
        }
    }
}
