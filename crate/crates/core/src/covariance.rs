//! Truncated axially symmetric covariance models.
//!
//! A [`HarmonicCovariance`] of truncation `N` holds, for each wavenumber
//! `m = 0..=N`, a lower-triangular factor `A_m` of the coefficient covariance
//! block `C_m = A_m A_m^*` of `(Y_mm, ..., Y_Nm)`, plus a nugget variance. The
//! continuous part of the covariance is
//!
//! ```text
//! K(L, L', l) = sum_{m=-N}^{N} sum_{n,n'=|m|}^{N} e^{iml} P̄_n^|m|(sin L) P̄_n'^|m|(sin L') c_m(n, n')
//! ```
//!
//! with `c_{-m} = conj(c_m)`. The nugget is added only on the diagonal of
//! covariance matrices (independent draws per observation) and to the
//! semivariance of distinct arguments.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::geom::{chordal_distance, lon_diff, normalize_lon, GeoPoint};
use crate::harmonics::basis::BasisLayout;
use crate::harmonics::legendre::{tri_index, tri_len, NormalizedLegendre, Recurrence};
use crate::linalg::{psd_cholesky, psd_rank, C64};

/// Truncated harmonic covariance with Cholesky-parameterized blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicCovariance {
    truncation: usize,
    factors: Vec<DMatrix<C64>>,
    blocks: Vec<DMatrix<C64>>,
    nugget: f64,
}

fn block_products(factors: &[DMatrix<C64>]) -> Vec<DMatrix<C64>> {
    factors.iter().map(|a| a * a.adjoint()).collect()
}

impl HarmonicCovariance {
    /// Validate and wrap factors `A_0..A_N`.
    ///
    /// `factors[m]` must be `(N-m+1)`-square and lower triangular with a real
    /// diagonal; `A_0` must be entirely real. Diagonal signs are free.
    pub fn new(truncation: usize, factors: Vec<DMatrix<C64>>, nugget: f64) -> Result<Self> {
        if factors.len() != truncation + 1 {
            return Err(invalid(format!(
                "expected {} factors for truncation {truncation}, got {}",
                truncation + 1,
                factors.len()
            )));
        }
        if !(nugget.is_finite() && nugget >= 0.0) {
            return Err(invalid(format!("nugget must be finite and >= 0, got {nugget}")));
        }
        for (m, a) in factors.iter().enumerate() {
            let d = truncation + 1 - m;
            if a.nrows() != d || a.ncols() != d {
                return Err(invalid(format!("A_{m} must be {d}x{d}")));
            }
            for i in 0..d {
                for j in 0..d {
                    let z = a[(i, j)];
                    if !(z.re.is_finite() && z.im.is_finite()) {
                        return Err(invalid(format!("A_{m}({i},{j}) is not finite")));
                    }
                    if j > i && z != C64::new(0.0, 0.0) {
                        return Err(invalid(format!("A_{m} is not lower triangular at ({i},{j})")));
                    }
                    if (i == j || m == 0) && z.im != 0.0 {
                        return Err(invalid(format!("A_{m}({i},{j}) must be real")));
                    }
                }
            }
        }
        let blocks = block_products(&factors);
        Ok(HarmonicCovariance {
            truncation,
            factors,
            blocks,
            nugget,
        })
    }

    /// Model with all factors zero (pure nugget).
    pub fn zeros(truncation: usize, nugget: f64) -> Result<Self> {
        let factors = (0..=truncation)
            .map(|m| DMatrix::zeros(truncation + 1 - m, truncation + 1 - m))
            .collect();
        Self::new(truncation, factors, nugget)
    }

    /// Factor Hermitian PSD blocks `C_0..C_N` (semidefinite allowed).
    pub fn from_blocks(blocks: &[DMatrix<C64>], nugget: f64) -> Result<Self> {
        if blocks.is_empty() {
            return Err(invalid("at least one block required"));
        }
        let truncation = blocks.len() - 1;
        let mut factors = Vec::with_capacity(blocks.len());
        for (m, c) in blocks.iter().enumerate() {
            let mut a = psd_cholesky(c, 1e-13)?;
            if m == 0 {
                a.iter_mut().for_each(|z| z.im = 0.0);
            }
            factors.push(a);
        }
        Self::new(truncation, factors, nugget)
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn with_nugget(&self, nugget: f64) -> Result<Self> {
        Self::new(self.truncation, self.factors.clone(), nugget)
    }

    pub fn factors(&self) -> &[DMatrix<C64>] {
        &self.factors
    }

    pub fn factor(&self, m: usize) -> &DMatrix<C64> {
        &self.factors[m]
    }

    /// `C_m = A_m A_m^*`.
    pub fn block(&self, m: usize) -> &DMatrix<C64> {
        &self.blocks[m]
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    /// Continuous covariance `K(L, L2, dl)`; `dl` is the longitude difference.
    pub fn k(&self, lat1: f64, lat2: f64, dl: f64) -> f64 {
        let mut p1 = vec![0.0; tri_len(self.truncation)];
        let mut p2 = vec![0.0; tri_len(self.truncation)];
        Recurrence.fill_at_latitude(self.truncation, lat1, &mut p1);
        Recurrence.fill_at_latitude(self.truncation, lat2, &mut p2);
        let (re, im) = self.k_complex(&p1, &p2, dl.to_radians());
        debug_assert!(im.abs() <= 1e-12 * (1.0 + re.abs()), "imaginary residue {im}");
        re
    }

    /// Full complex double sum over `m = -N..=N`, given Legendre tables.
    pub(crate) fn k_complex(&self, p1: &[f64], p2: &[f64], dl_rad: f64) -> (f64, f64) {
        let n_t = self.truncation;
        let mut total = C64::new(0.0, 0.0);
        for m in 0..=n_t {
            let c = &self.blocks[m];
            let d = n_t + 1 - m;
            let mut q = C64::new(0.0, 0.0);
            let mut q_neg = C64::new(0.0, 0.0);
            for a in 0..d {
                let pa = p1[tri_index(m + a, m)];
                let mut row = C64::new(0.0, 0.0);
                let mut row_neg = C64::new(0.0, 0.0);
                for b in 0..d {
                    let pb = p2[tri_index(m + b, m)];
                    row += c[(a, b)] * pb;
                    row_neg += c[(a, b)].conj() * pb;
                }
                q += row * pa;
                q_neg += row_neg * pa;
            }
            if m == 0 {
                total += q;
            } else {
                let e = C64::from_polar(1.0, m as f64 * dl_rad);
                total += e * q + e.conj() * q_neg;
            }
        }
        (total.re, total.im)
    }

    /// Semivariance `γ(L, L2, dl)`, including the nugget for distinct arguments.
    ///
    /// Computed from coefficient differences `d_n = P̄_n^m(sin L) e^{i m dl} −
    /// P̄_n^m(sin L2)` as `½ d^T C_0 d + Σ_{m>=1} d^T C_m conj(d)`, which avoids
    /// the cancellation in `½(K(p,p) + K(q,q)) − K(p,q)` for nearby points. The
    /// `n = m = 0` difference is exactly zero.
    pub fn gamma(&self, lat1: f64, lat2: f64, dl: f64) -> f64 {
        let n_t = self.truncation;
        let mut p1 = vec![0.0; tri_len(n_t)];
        let mut p2 = vec![0.0; tri_len(n_t)];
        Recurrence.fill_at_latitude(n_t, lat1, &mut p1);
        Recurrence.fill_at_latitude(n_t, lat2, &mut p2);
        let dl_rad = dl.to_radians();
        let mut cont = 0.0;
        for m in 0..=n_t {
            let c = &self.blocks[m];
            let e = C64::from_polar(1.0, m as f64 * dl_rad);
            let d: Vec<C64> = (m..=n_t).map(|n| e * p1[tri_index(n, m)] - p2[tri_index(n, m)]).collect();
            let mut q = C64::new(0.0, 0.0);
            for (a, da) in d.iter().enumerate() {
                let row: C64 = d.iter().enumerate().map(|(b, db)| c[(a, b)] * db.conj()).sum();
                q += da * row;
            }
            cont += if m == 0 { 0.5 * q.re } else { q.re };
        }
        let distinct = lat1 != lat2 || normalize_lon(dl) != 0.0;
        if distinct {
            cont + self.nugget
        } else {
            cont
        }
    }

    /// Real `(N+1)^2` square factor `F` with `F F^T = Σ`, the coefficient
    /// covariance in the [`BasisLayout`] basis, so that `b(p)^T Σ b(q) = K(p, q)`.
    ///
    /// For `m >= 1` and `A_m = P + iQ` the block is `[[P, Q], [-Q, P]]`
    /// (cosine rows first), giving `Σ_m = [[Re C_m, Im C_m], [-Im C_m, Re C_m]]`.
    pub fn sigma_factor(&self) -> DMatrix<f64> {
        let layout = BasisLayout::new(self.truncation);
        let mut f = DMatrix::zeros(layout.dim(), layout.dim());
        embed_factor(&layout, &self.factors, &mut f);
        f
    }

    /// `Σ = F F^T`.
    pub fn sigma(&self) -> DMatrix<f64> {
        let f = self.sigma_factor();
        &f * f.transpose()
    }

    /// Conditional variances `V_{jm}`: the squared diagonal of each `A_m`,
    /// indexed `[m][j - m]`.
    pub fn conditional_variances(&self) -> Vec<Vec<f64>> {
        self.factors
            .iter()
            .map(|a| a.diagonal().iter().map(|z| z.re * z.re).collect())
            .collect()
    }

    /// Flip column signs so every diagonal entry is nonnegative. The blocks
    /// `C_m` are unchanged.
    pub fn canonicalize(&self) -> Self {
        let mut factors = self.factors.clone();
        for a in &mut factors {
            for j in 0..a.ncols() {
                if a[(j, j)].re < 0.0 {
                    let mut col = a.column_mut(j);
                    col.iter_mut().for_each(|z| *z = -*z);
                }
            }
        }
        Self::new(self.truncation, factors, self.nugget).expect("sign flips keep validity")
    }

    /// The same model with the first column of `A_0` set to zero. Unlike
    /// [`crate::fitting::drop_constant_harmonic`] the rest of `A_0` is kept,
    /// so the semivariance generally changes.
    pub fn zero_a0_first_column(&self) -> Self {
        let mut factors = self.factors.clone();
        factors[0].column_mut(0).fill(C64::new(0.0, 0.0));
        Self::new(self.truncation, factors, self.nugget).expect("zeroing keeps validity")
    }

    /// Zero every column whose diagonal entry is at most `tol` in magnitude.
    pub fn prune_zero_columns(&self, tol: f64) -> Self {
        let mut factors = self.factors.clone();
        for a in &mut factors {
            for j in 0..a.ncols() {
                if a[(j, j)].re.abs() <= tol {
                    a.column_mut(j).fill(C64::new(0.0, 0.0));
                }
            }
        }
        Self::new(self.truncation, factors, self.nugget).expect("zeroing keeps validity")
    }

    /// Per-wavenumber count of diagonal entries with magnitude above `tol`.
    pub fn effective_rank(&self, tol: f64) -> Vec<usize> {
        self.factors
            .iter()
            .map(|a| a.diagonal().iter().filter(|z| z.re.abs() > tol).count())
            .collect()
    }

    /// Numerical rank of each `C_m` from its eigenvalues.
    pub fn block_ranks(&self, tol: f64) -> Vec<usize> {
        self.blocks.iter().map(|c| psd_rank(c, tol)).collect()
    }

    /// True iff `|K(L,L',l) - K(L,L',-l)| <= tol` on a fixed grid:
    /// `L, L'` in {-80, -45, -10, 0, 20, 60, 85} and `l` in {5, 30, 75, 120, 170}.
    pub fn is_longitudinally_reversible(&self, tol: f64) -> bool {
        const LATS: [f64; 7] = [-80.0, -45.0, -10.0, 0.0, 20.0, 60.0, 85.0];
        const LONS: [f64; 5] = [5.0, 30.0, 75.0, 120.0, 170.0];
        LATS.iter().all(|&a| {
            LATS.iter().all(|&b| {
                LONS.iter()
                    .all(|&l| (self.k(a, b, l) - self.k(a, b, -l)).abs() <= tol)
            })
        })
    }
}

pub(crate) fn embed_factor(layout: &BasisLayout, factors: &[DMatrix<C64>], f: &mut DMatrix<f64>) {
    let n_t = layout.truncation();
    let a0 = &factors[0];
    for i in 0..=n_t {
        for j in 0..=i {
            f[(i, j)] = a0[(i, j)].re;
        }
    }
    for (m, a) in factors.iter().enumerate().skip(1) {
        let d = layout.block_len(m);
        let o = layout.offset(m);
        for i in 0..d {
            for j in 0..=i {
                let z = a[(i, j)];
                f[(o + i, o + j)] = z.re;
                f[(o + d + i, o + d + j)] = z.re;
                f[(o + i, o + d + j)] = z.im;
                f[(o + d + i, o + j)] = -z.im;
            }
        }
    }
}

/// `C_m = A_m A_m^*` for every wavenumber.
pub fn assemble_blocks(model: &HarmonicCovariance) -> Vec<DMatrix<C64>> {
    model.blocks().to_vec()
}

/// `K(L, L2, dl)` without the nugget.
pub fn k_value(model: &HarmonicCovariance, lat1: f64, lat2: f64, dl: f64) -> f64 {
    model.k(lat1, lat2, dl)
}

/// Semivariance of the model, nugget included for distinct arguments.
pub fn gamma_model(model: &HarmonicCovariance, lat1: f64, lat2: f64, dl: f64) -> f64 {
    model.gamma(lat1, lat2, dl)
}

/// Real parameters of a truncation-`N` model, nugget included:
/// `(N+1)(N^2+2N+3)/3 + 1`.
pub fn param_count(truncation: usize) -> usize {
    let n1 = truncation + 1;
    n1 * (truncation * truncation + 2 * truncation + 3) / 3 + 1
}

/// Nugget plus exponential covariance in chordal distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpChordalModel {
    pub theta1: f64,
    pub theta2: f64,
    pub nugget: f64,
}

impl ExpChordalModel {
    pub fn new(theta1: f64, theta2: f64, nugget: f64) -> Result<Self> {
        if !(theta1.is_finite() && theta1 >= 0.0) {
            return Err(invalid(format!("theta1 must be >= 0, got {theta1}")));
        }
        if !(theta2.is_finite() && theta2 > 0.0) {
            return Err(invalid(format!("theta2 must be > 0, got {theta2}")));
        }
        if !(nugget.is_finite() && nugget >= 0.0) {
            return Err(invalid(format!("nugget must be >= 0, got {nugget}")));
        }
        Ok(ExpChordalModel {
            theta1,
            theta2,
            nugget,
        })
    }
}

/// `θ1 exp(-d/θ2)`, plus the nugget when `d == 0`.
pub fn exp_chordal_cov(model: &ExpChordalModel, d: f64) -> f64 {
    let c = model.theta1 * (-d / model.theta2).exp();
    if d == 0.0 {
        c + model.nugget
    } else {
        c
    }
}

/// A covariance that can be evaluated between points on the sphere.
pub trait SpatialCovariance: Sync {
    /// Continuous part, without the nugget.
    fn continuous(&self, p: &GeoPoint, q: &GeoPoint) -> f64;

    fn nugget(&self) -> f64;

    /// `s × s` covariance matrix with the nugget on the diagonal.
    fn dense_covariance(&self, points: &[GeoPoint], exec: Execution) -> DMatrix<f64> {
        let n = points.len();
        let rows = exec.map_range(n, |i| {
            (0..n)
                .map(|j| self.continuous(&points[i], &points[j]))
                .collect::<Vec<_>>()
        });
        let mut out = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        symmetrize_add_nugget(&mut out, self.nugget());
        out
    }

    /// `s × t` continuous cross-covariance between points and targets.
    fn cross_covariance(
        &self,
        points: &[GeoPoint],
        targets: &[GeoPoint],
        exec: Execution,
    ) -> DMatrix<f64> {
        let cols = exec.map(targets, |t| {
            points.iter().map(|p| self.continuous(p, t)).collect::<Vec<_>>()
        });
        DMatrix::from_fn(points.len(), targets.len(), |i, j| cols[j][i])
    }
}

fn symmetrize_add_nugget(m: &mut DMatrix<f64>, nugget: f64) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m[(i, i)] += nugget;
    }
}

impl SpatialCovariance for ExpChordalModel {
    fn continuous(&self, p: &GeoPoint, q: &GeoPoint) -> f64 {
        self.theta1 * (-chordal_distance(p, q) / self.theta2).exp()
    }

    fn nugget(&self) -> f64 {
        self.nugget
    }
}

impl HarmonicCovariance {
    fn tables(&self, points: &[GeoPoint], exec: Execution) -> Vec<Vec<f64>> {
        let len = tri_len(self.truncation);
        exec.map(points, |p| {
            let mut t = vec![0.0; len];
            Recurrence.fill_at_latitude(self.truncation, p.lat(), &mut t);
            t
        })
    }
}

impl SpatialCovariance for HarmonicCovariance {
    fn continuous(&self, p: &GeoPoint, q: &GeoPoint) -> f64 {
        self.k(p.lat(), q.lat(), lon_diff(p.lon(), q.lon()).expect("finite"))
    }

    fn nugget(&self) -> f64 {
        self.nugget
    }

    fn dense_covariance(&self, points: &[GeoPoint], exec: Execution) -> DMatrix<f64> {
        let tabs = self.tables(points, exec);
        let n = points.len();
        let rows = exec.map_range(n, |i| {
            (0..=i)
                .map(|j| {
                    let dl = (points[i].lon() - points[j].lon()).to_radians();
                    self.k_complex(&tabs[i], &tabs[j], dl).0
                })
                .collect::<Vec<_>>()
        });
        let mut out = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        symmetrize_add_nugget(&mut out, self.nugget);
        out
    }

    fn cross_covariance(
        &self,
        points: &[GeoPoint],
        targets: &[GeoPoint],
        exec: Execution,
    ) -> DMatrix<f64> {
        let tp = self.tables(points, exec);
        let tt = self.tables(targets, exec);
        let cols = exec.map_range(targets.len(), |j| {
            (0..points.len())
                .map(|i| {
                    let dl = (points[i].lon() - targets[j].lon()).to_radians();
                    self.k_complex(&tp[i], &tt[j], dl).0
                })
                .collect::<Vec<_>>()
        });
        DMatrix::from_fn(points.len(), targets.len(), |i, j| cols[j][i])
    }
}

/// Either fitted covariance family.
#[derive(Clone, Debug, PartialEq)]
pub enum CovarianceModel {
    Harmonic(HarmonicCovariance),
    ExpChordal(ExpChordalModel),
}

impl SpatialCovariance for CovarianceModel {
    fn continuous(&self, p: &GeoPoint, q: &GeoPoint) -> f64 {
        match self {
            CovarianceModel::Harmonic(h) => h.continuous(p, q),
            CovarianceModel::ExpChordal(e) => e.continuous(p, q),
        }
    }

    fn nugget(&self) -> f64 {
        match self {
            CovarianceModel::Harmonic(h) => h.nugget,
            CovarianceModel::ExpChordal(e) => e.nugget,
        }
    }

    fn dense_covariance(&self, points: &[GeoPoint], exec: Execution) -> DMatrix<f64> {
        match self {
            CovarianceModel::Harmonic(h) => h.dense_covariance(points, exec),
            CovarianceModel::ExpChordal(e) => e.dense_covariance(points, exec),
        }
    }

    fn cross_covariance(
        &self,
        points: &[GeoPoint],
        targets: &[GeoPoint],
        exec: Execution,
    ) -> DMatrix<f64> {
        match self {
            CovarianceModel::Harmonic(h) => h.cross_covariance(points, targets, exec),
            CovarianceModel::ExpChordal(e) => e.cross_covariance(points, targets, exec),
        }
    }
}
