//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Fold another accumulator into this one.
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Lower-triangular factor `A` with real diagonal and `A A^* = C` for a
/// Hermitian positive semidefinite `C`.
///
/// A pivot at or below `tol * max_diag` is treated as zero and its whole
/// column is set to zero. Fails if a pivot is more negative than that.
pub fn psd_cholesky(c: &DMatrix<C64>, tol: f64) -> Result<DMatrix<C64>> {
    let n = c.nrows();
    let scale = (0..n).map(|i| c[(i, i)].re.abs()).fold(0.0, f64::max);
    let thresh = tol * scale.max(f64::MIN_POSITIVE);
    let mut a = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        let mut d = c[(j, j)].re;
        for k in 0..j {
            d -= a[(j, k)].norm_sqr();
        }
        if d <= thresh {
            if d < -thresh.max(1e-9 * scale) {
                return Err(Error::Factorization(format!(
                    "matrix is not positive semidefinite (pivot {d:e} at {j})"
                )));
            }
            continue;
        }
        let djj = d.sqrt();
        a[(j, j)] = C64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = c[(i, j)];
            for k in 0..j {
                s -= a[(i, k)] * a[(j, k)].conj();
            }
            a[(i, j)] = s / djj;
        }
    }
    Ok(a)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(c: &DMatrix<C64>) -> Vec<f64> {
    let eig = SymmetricEigen::new(c.clone());
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Replace negative eigenvalues by zero.
pub fn clip_to_psd(c: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = SymmetricEigen::new(c.clone());
    let vals = eig.eigenvalues.map(|v| C64::new(v.max(0.0), 0.0));
    let u = &eig.eigenvectors;
    let out = u * DMatrix::from_diagonal(&vals) * u.adjoint();
    // restore exact Hermitian symmetry
    (&out + out.adjoint()) * C64::new(0.5, 0.0)
}

/// Numerical rank of a Hermitian PSD matrix: eigenvalues above
/// `tol * largest`.
pub fn psd_rank(c: &DMatrix<C64>, tol: f64) -> usize {
    let vals = hermitian_eigenvalues(c);
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    vals.iter().filter(|&&v| v > tol * top && v > 0.0).count()
}

/// Real Cholesky of a symmetric positive definite matrix, with a readable error.
pub fn cholesky(m: DMatrix<f64>, what: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    nalgebra::Cholesky::new(m)
        .ok_or_else(|| Error::Factorization(format!("{what} is not positive definite")))
}

/// `log det` from a Cholesky factor.
pub fn chol_logdet(ch: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> f64 {
    2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub fn dot(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(b)
}
