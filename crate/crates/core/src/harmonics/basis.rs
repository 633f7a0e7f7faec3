//! Real harmonic bases for the covariance expansion and the mean regression.

use nalgebra::DMatrix;

use super::legendre::{tri_index, tri_len, NormalizedLegendre};
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::geom::GeoPoint;

/// Layout of the real basis of dimension `(N+1)^2`.
///
/// Wavenumber-major: first the `N+1` zonal entries `P̄_n^0(sin L)` for
/// `n = 0..=N`; then for each `m = 1..=N` a cosine block
/// `√2 P̄_n^m(sin L) cos(m l)` for `n = m..=N` followed by the matching sine
/// block `√2 P̄_n^m(sin L) sin(m l)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BasisLayout {
    truncation: usize,
}

impl BasisLayout {
    pub fn new(truncation: usize) -> Self {
        BasisLayout { truncation }
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn dim(&self) -> usize {
        (self.truncation + 1) * (self.truncation + 1)
    }

    /// Number of degrees carried by wavenumber `m`.
    pub fn block_len(&self, m: usize) -> usize {
        self.truncation + 1 - m
    }

    /// First index of wavenumber `m`.
    pub fn offset(&self, m: usize) -> usize {
        if m == 0 {
            return 0;
        }
        let n1 = self.truncation + 1;
        // (N+1) + sum_{k=1}^{m-1} 2 (N+1-k)
        n1 + (m - 1) * (2 * n1 - m)
    }

    /// Index of the cosine (or zonal, for `m = 0`) entry of degree `n`.
    pub fn cos_index(&self, m: usize, n: usize) -> usize {
        self.offset(m) + (n - m)
    }

    /// Index of the sine entry of degree `n`, `m >= 1`.
    pub fn sin_index(&self, m: usize, n: usize) -> usize {
        debug_assert!(m >= 1);
        self.offset(m) + self.block_len(m) + (n - m)
    }

    /// Fill `out` given the Legendre values `leg` (triangular layout).
    pub(crate) fn fill(&self, leg: &[f64], lon_deg: f64, out: &mut [f64]) {
        let n_t = self.truncation;
        for n in 0..=n_t {
            out[n] = leg[tri_index(n, 0)];
        }
        let lon = lon_deg.to_radians();
        for m in 1..=n_t {
            let (s, c) = (m as f64 * lon).sin_cos();
            let (s, c) = (s * std::f64::consts::SQRT_2, c * std::f64::consts::SQRT_2);
            for n in m..=n_t {
                let p = leg[tri_index(n, m)];
                out[self.cos_index(m, n)] = p * c;
                out[self.sin_index(m, n)] = p * s;
            }
        }
    }
}

/// The real basis vector at `(lat, lon)` for truncation `N`.
pub fn real_basis<S: NormalizedLegendre + ?Sized>(
    truncation: usize,
    lat_deg: f64,
    lon_deg: f64,
    source: &S,
) -> Result<Vec<f64>> {
    if truncation > source.max_degree() {
        return Err(invalid(format!(
            "truncation {truncation} exceeds Legendre source degree {}",
            source.max_degree()
        )));
    }
    let layout = BasisLayout::new(truncation);
    let mut leg = vec![0.0; tri_len(truncation)];
    source.fill_at_latitude(truncation, lat_deg, &mut leg);
    let mut out = vec![0.0; layout.dim()];
    layout.fill(&leg, lon_deg, &mut out);
    Ok(out)
}

/// Stack [`real_basis`] rows for every point into an `s × (N+1)^2` matrix.
pub fn basis_matrix<S: NormalizedLegendre + ?Sized>(
    truncation: usize,
    points: &[GeoPoint],
    source: &S,
    exec: Execution,
) -> Result<DMatrix<f64>> {
    if truncation > source.max_degree() {
        return Err(invalid(format!(
            "truncation {truncation} exceeds Legendre source degree {}",
            source.max_degree()
        )));
    }
    let layout = BasisLayout::new(truncation);
    let r = layout.dim();
    let rows = exec.map_chunks(points, 256, |_, chunk| {
        let mut leg = vec![0.0; tri_len(truncation)];
        let mut out = vec![0.0; r * chunk.len()];
        for (k, p) in chunk.iter().enumerate() {
            source.fill_at_latitude(truncation, p.lat(), &mut leg);
            layout.fill(&leg, p.lon(), &mut out[k * r..(k + 1) * r]);
        }
        out
    });
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(points.len(), r, &flat))
}

/// Highest degree of the mean regression.
pub const MEAN_MAX_DEGREE: usize = 12;
/// Highest order of the mean regression.
pub const MEAN_MAX_ORDER: usize = 3;
/// Number of non-constant regressors.
pub const MEAN_COVARIATES: usize = 78;
/// Length of a design row: the constant plus [`MEAN_COVARIATES`].
pub const MEAN_DESIGN_LEN: usize = MEAN_COVARIATES + 1;

/// Trigonometric factor of a mean regressor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

impl Trig {
    pub fn as_str(self) -> &'static str {
        match self {
            Trig::Cos => "cos",
            Trig::Sin => "sin",
        }
    }
}

/// `(n, m, trig)` for each column of the mean design, in column order:
/// degree-major, then order, cosine before sine.
pub fn mean_design_terms() -> Vec<(usize, usize, Trig)> {
    let mut terms = Vec::with_capacity(MEAN_DESIGN_LEN);
    for n in 0..=MEAN_MAX_DEGREE {
        for m in 0..=n.min(MEAN_MAX_ORDER) {
            terms.push((n, m, Trig::Cos));
            if m > 0 {
                terms.push((n, m, Trig::Sin));
            }
        }
    }
    terms
}

/// Regressors `P_n^m(sin L) cos(m l)` and `P_n^m(sin L) sin(m l)` (unnormalized,
/// direct recurrence) in [`mean_design_terms`] order.
pub fn mean_design_row(lat_deg: f64, lon_deg: f64) -> Vec<f64> {
    let (x, _) = lat_deg.to_radians().sin_cos();
    let x = x.clamp(-1.0, 1.0);
    let s = (1.0 - x * x).max(0.0).sqrt();
    let lon = lon_deg.to_radians();
    // p[m][n] = P_n^m(x), same recurrence as `legendre_assoc`
    let mut p = [[0.0; MEAN_MAX_DEGREE + 1]; MEAN_MAX_ORDER + 1];
    for (m, row) in p.iter_mut().enumerate() {
        let mut pmm = 1.0;
        for k in 1..=m {
            pmm *= (2 * k - 1) as f64 * s;
        }
        row[m] = pmm;
        if m < MEAN_MAX_DEGREE {
            row[m + 1] = x * (2 * m + 1) as f64 * pmm;
        }
        for l in (m + 2)..=MEAN_MAX_DEGREE {
            row[l] = ((2 * l - 1) as f64 * x * row[l - 1] - (l + m - 1) as f64 * row[l - 2]) / (l - m) as f64;
        }
    }
    let trig: Vec<(f64, f64)> = (0..=MEAN_MAX_ORDER).map(|m| (m as f64 * lon).sin_cos()).collect();
    let mut out = Vec::with_capacity(MEAN_DESIGN_LEN);
    for n in 0..=MEAN_MAX_DEGREE {
        for m in 0..=n.min(MEAN_MAX_ORDER) {
            let (sin, cos) = trig[m];
            out.push(p[m][n] * cos);
            if m > 0 {
                out.push(p[m][n] * sin);
            }
        }
    }
    out
}
