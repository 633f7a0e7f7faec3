//! Precomputed `P̄_n^m(sin θ)` on a 0.25° latitude grid with cubic-spline
//! interpolation between knots.
//!
//! The spline is clamped with the exact end slopes at ±90°. Knot values come
//! from the direct recurrence, and evaluation exactly at a knot returns the
//! stored value.

use super::legendre::{norm_factor, normalized_all, tri_index, tri_len, NormalizedLegendre};

/// Knot spacing in degrees.
pub const KNOT_STEP_DEG: f64 = 0.25;
/// Knots from -90° to 90° inclusive.
pub const KNOT_COUNT: usize = 721;

/// Spline interpolation table for all `0 <= m <= n <= n_max`.
#[derive(Clone, Debug)]
pub struct SplineTable {
    n_max: usize,
    // channel-major: values[c * KNOT_COUNT + i]
    values: Vec<f64>,
    second: Vec<f64>,
}

fn knot_lat(i: usize) -> f64 {
    -90.0 + KNOT_STEP_DEG * i as f64
}

/// Slope of `P̄_n^m(sin θ)` with respect to θ in degrees at θ = ±90°.
fn end_slopes(n: usize, m: usize) -> (f64, f64) {
    if m != 1 {
        return (0.0, 0.0);
    }
    let c = norm_factor(n, 1) * (n * (n + 1)) as f64 / 2.0;
    let south = if n % 2 == 1 { c } else { -c };
    let per_deg = std::f64::consts::PI / 180.0;
    (south * per_deg, -c * per_deg)
}

/// Second derivatives of a clamped cubic spline on a uniform grid.
fn clamped_second_derivatives(y: &[f64], h: f64, d0: f64, dn: f64) -> Vec<f64> {
    let n = y.len();
    let mut diag = vec![4.0 * h; n];
    let off = h;
    let mut rhs = vec![0.0; n];
    diag[0] = 2.0 * h;
    diag[n - 1] = 2.0 * h;
    rhs[0] = 6.0 * ((y[1] - y[0]) / h - d0);
    rhs[n - 1] = 6.0 * (dn - (y[n - 1] - y[n - 2]) / h);
    for i in 1..n - 1 {
        rhs[i] = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / h;
    }
    // Thomas algorithm with constant off-diagonals.
    for i in 1..n {
        let w = off / diag[i - 1];
        diag[i] -= w * off;
        rhs[i] -= w * rhs[i - 1];
    }
    let mut m = vec![0.0; n];
    m[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        m[i] = (rhs[i] - off * m[i + 1]) / diag[i];
    }
    m
}

/// Build the table of exact knot values and spline coefficients.
pub fn build_spline_table(n_max: usize) -> SplineTable {
    let channels = tri_len(n_max);
    let mut values = vec![0.0; channels * KNOT_COUNT];
    let mut buf = vec![0.0; channels];
    for i in 0..KNOT_COUNT {
        let (x, s) = knot_lat(i).to_radians().sin_cos();
        let (x, s) = match i {
            0 => (-1.0, 0.0),
            _ if i == KNOT_COUNT - 1 => (1.0, 0.0),
            _ => (x, s),
        };
        normalized_all(n_max, x, s, &mut buf);
        for c in 0..channels {
            values[c * KNOT_COUNT + i] = buf[c];
        }
    }
    let mut second = vec![0.0; channels * KNOT_COUNT];
    for n in 0..=n_max {
        for m in 0..=n {
            let c = tri_index(n, m);
            let y = &values[c * KNOT_COUNT..(c + 1) * KNOT_COUNT];
            let (d0, dn) = end_slopes(n, m);
            let mm = clamped_second_derivatives(y, KNOT_STEP_DEG, d0, dn);
            second[c * KNOT_COUNT..(c + 1) * KNOT_COUNT].copy_from_slice(&mm);
        }
    }
    SplineTable {
        n_max,
        values,
        second,
    }
}

impl SplineTable {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Number of `(n, m)` channels.
    pub fn channels(&self) -> usize {
        tri_len(self.n_max)
    }

    pub fn knot_count(&self) -> usize {
        KNOT_COUNT
    }

    /// Stored exact value at knot `i` (latitude `-90 + 0.25 i`).
    pub fn knot_value(&self, n: usize, m: usize, i: usize) -> f64 {
        self.values[tri_index(n, m) * KNOT_COUNT + i]
    }

    /// Interpolated `P̄_n^m(sin L)`; `lat_deg` is clamped into `[-90, 90]`.
    pub fn eval(&self, n: usize, m: usize, lat_deg: f64) -> f64 {
        assert!(m <= n && n <= self.n_max, "({n}, {m}) outside table");
        let (i, a, b) = locate(lat_deg);
        self.eval_channel(tri_index(n, m), i, a, b)
    }

    #[inline]
    fn eval_channel(&self, c: usize, i: usize, a: f64, b: f64) -> f64 {
        let base = c * KNOT_COUNT;
        if b == 0.0 {
            return self.values[base + i];
        }
        let h = KNOT_STEP_DEG;
        let (y0, y1) = (self.values[base + i], self.values[base + i + 1]);
        let (m0, m1) = (self.second[base + i], self.second[base + i + 1]);
        m0 * a * a * a / (6.0 * h) + m1 * b * b * b / (6.0 * h) + (y0 / h - m0 * h / 6.0) * a
            + (y1 / h - m1 * h / 6.0) * b
    }
}

/// Interval index and distances `(θ_{i+1} - θ, θ - θ_i)`; `b == 0` exactly at a knot.
fn locate(lat_deg: f64) -> (usize, f64, f64) {
    let lat = lat_deg.clamp(-90.0, 90.0);
    let u = (lat + 90.0) / KNOT_STEP_DEG;
    if u.fract() == 0.0 {
        return (u as usize, KNOT_STEP_DEG, 0.0);
    }
    let i = (u.floor() as usize).min(KNOT_COUNT - 2);
    let t0 = knot_lat(i);
    let b = lat - t0;
    (i, KNOT_STEP_DEG - b, b)
}

impl NormalizedLegendre for SplineTable {
    fn max_degree(&self) -> usize {
        self.n_max
    }

    fn fill_at_latitude(&self, nmax: usize, lat_deg: f64, out: &mut [f64]) {
        assert!(nmax <= self.n_max, "degree {nmax} exceeds table degree {}", self.n_max);
        let (i, a, b) = locate(lat_deg);
        for c in 0..tri_len(nmax) {
            out[c] = self.eval_channel(c, i, a, b);
        }
    }
}
