//! Associated Legendre functions.
//!
//! Convention: no Condon-Shortley phase, so `P_n^m(x) >= 0` near `x = 1`.
//! The normalized functions satisfy `∫_{-1}^{1} P̄_n^m(x)^2 dx = 1`.

use crate::error::{invalid, Result};

/// Position of `(n, m)` in triangular storage, `0 <= m <= n`.
#[inline]
pub fn tri_index(n: usize, m: usize) -> usize {
    n * (n + 1) / 2 + m
}

/// Number of `(n, m)` channels with `0 <= m <= n <= nmax`.
#[inline]
pub fn tri_len(nmax: usize) -> usize {
    (nmax + 1) * (nmax + 2) / 2
}

/// A degree/order pair with `|m| <= n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HarmonicIndex {
    n: usize,
    m: i64,
}

impl HarmonicIndex {
    pub fn new(n: usize, m: i64) -> Result<Self> {
        if m.unsigned_abs() as usize > n {
            return Err(invalid(format!("order {m} exceeds degree {n}")));
        }
        Ok(HarmonicIndex { n, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> i64 {
        self.m
    }
}

fn check(n: usize, m: usize, x: f64) -> Result<()> {
    if m > n {
        return Err(invalid(format!("order {m} exceeds degree {n}")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(invalid(format!("argument {x} outside [-1, 1]")));
    }
    Ok(())
}

/// Unnormalized `P_n^m(x)` by upward recurrence in the degree.
pub fn legendre_assoc(n: usize, m: usize, x: f64) -> Result<f64> {
    check(n, m, x)?;
    let s = (1.0 - x * x).max(0.0).sqrt();
    // P_m^m = (2m-1)!! s^m
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= (2 * k - 1) as f64 * s;
    }
    if n == m {
        return Ok(pmm);
    }
    let mut prev = pmm;
    let mut cur = x * (2 * m + 1) as f64 * pmm;
    for l in (m + 2)..=n {
        let next = ((2 * l - 1) as f64 * x * cur - (l + m - 1) as f64 * prev) / (l - m) as f64;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Normalized `P̄_n^m(x)`.
pub fn legendre_norm(n: usize, m: usize, x: f64) -> Result<f64> {
    check(n, m, x)?;
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut out = vec![0.0; tri_len(n)];
    normalized_all(n, x, s, &mut out);
    Ok(out[tri_index(n, m)])
}

/// Fill `out[tri_index(n, m)]` with `P̄_n^m(x)` for all `m <= n <= nmax`.
///
/// `s` must equal `sqrt(1 - x^2)`; callers working in latitude pass
/// `(sin L, cos L)` directly to avoid cancellation near the poles.
pub fn normalized_all(nmax: usize, x: f64, s: f64, out: &mut [f64]) {
    debug_assert!(out.len() >= tri_len(nmax));
    let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
    for m in 0..=nmax {
        if m > 0 {
            pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        out[tri_index(m, m)] = pmm;
        if m == nmax {
            break;
        }
        let mut prev = pmm;
        let mut cur = ((2 * m + 3) as f64).sqrt() * x * pmm;
        out[tri_index(m + 1, m)] = cur;
        for n in (m + 2)..=nmax {
            let (nf, mf) = (n as f64, m as f64);
            let a = ((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf)).sqrt();
            let b = (((nf - 1.0) * (nf - 1.0) - mf * mf) / (4.0 * (nf - 1.0) * (nf - 1.0) - 1.0)).sqrt();
            let next = a * (x * cur - b * prev);
            prev = cur;
            cur = next;
            out[tri_index(n, m)] = cur;
        }
    }
}

/// Source of normalized Legendre values at a latitude.
pub trait NormalizedLegendre: Sync {
    /// Largest supported degree.
    fn max_degree(&self) -> usize;

    /// Fill `out` (triangular layout) with `P̄_n^m(sin L)` for `n <= nmax`.
    fn fill_at_latitude(&self, nmax: usize, lat_deg: f64, out: &mut [f64]);
}

/// Direct evaluation by the normalized recurrence.
#[derive(Clone, Copy, Debug, Default)]
pub struct Recurrence;

impl NormalizedLegendre for Recurrence {
    fn max_degree(&self) -> usize {
        usize::MAX
    }

    fn fill_at_latitude(&self, nmax: usize, lat_deg: f64, out: &mut [f64]) {
        let (x, s) = lat_deg.to_radians().sin_cos();
        normalized_all(nmax, x, s.max(0.0), out);
    }
}

/// `sqrt((2n+1)/2 * (n-m)!/(n+m)!)`.
pub fn norm_factor(n: usize, m: usize) -> f64 {
    let mut ratio = 1.0;
    for k in (n - m + 1)..=(n + m) {
        ratio /= k as f64;
    }
    ((2 * n + 1) as f64 / 2.0 * ratio).sqrt()
}
