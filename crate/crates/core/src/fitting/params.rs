//! Flat real parameter vectors for [`HarmonicCovariance`].
//!
//! Order: the lower triangle of `A_0` row by row; then for each `m >= 1` the
//! lower triangle of `A_m` row by row, a real diagonal entry or a
//! `(re, im)` pair below the diagonal; finally one nugget parameter.
//! Diagonal signs are free.

use nalgebra::DMatrix;

use crate::covariance::HarmonicCovariance;
use crate::error::Result;
use crate::harmonics::basis::BasisLayout;
use crate::linalg::C64;

/// How the last parameter maps to the nugget variance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NuggetParam {
    /// `nugget = θ²`; allows an exact zero.
    Square,
    /// `nugget = exp(θ)`; keeps the nugget strictly positive.
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    truncation: usize,
    nugget: NuggetParam,
}

impl ParamLayout {
    pub fn new(truncation: usize, nugget: NuggetParam) -> Self {
        ParamLayout { truncation, nugget }
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn len(&self) -> usize {
        crate::covariance::param_count(self.truncation)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nugget_index(&self) -> usize {
        self.len() - 1
    }

    /// Indices of `A_0(n, 0)`, `n = 0..=N`: the entries that fix the variance
    /// of the constant harmonic and its covariances with the other zonal ones.
    pub fn a0_first_column(&self) -> Vec<usize> {
        (0..=self.truncation).map(|i| i * (i + 1) / 2).collect()
    }

    /// Human-readable name of a parameter.
    pub fn name(&self, index: usize) -> String {
        if index == self.nugget_index() {
            return match self.nugget {
                NuggetParam::Square => "sqrt_nugget".into(),
                NuggetParam::Log => "log_nugget".into(),
            };
        }
        let mut k = 0;
        for m in 0..=self.truncation {
            let d = self.truncation + 1 - m;
            for i in 0..d {
                for j in 0..=i {
                    if m == 0 || i == j {
                        if k == index {
                            return format!("a{m}({},{})", i + m, j + m);
                        }
                        k += 1;
                    } else {
                        if k == index {
                            return format!("re a{m}({},{})", i + m, j + m);
                        }
                        if k + 1 == index {
                            return format!("im a{m}({},{})", i + m, j + m);
                        }
                        k += 2;
                    }
                }
            }
        }
        unreachable!("index {index} out of range")
    }

    pub fn nugget_value(&self, theta: f64) -> f64 {
        match self.nugget {
            NuggetParam::Square => theta * theta,
            NuggetParam::Log => theta.exp(),
        }
    }

    /// d nugget / d θ.
    pub fn nugget_derivative(&self, theta: f64) -> f64 {
        match self.nugget {
            NuggetParam::Square => 2.0 * theta,
            NuggetParam::Log => theta.exp(),
        }
    }

    fn nugget_param(&self, nugget: f64) -> f64 {
        match self.nugget {
            NuggetParam::Square => nugget.sqrt(),
            NuggetParam::Log => nugget.ln(),
        }
    }

    pub fn to_params(&self, model: &HarmonicCovariance) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.len());
        for (m, a) in model.factors().iter().enumerate() {
            for i in 0..a.nrows() {
                for j in 0..=i {
                    p.push(a[(i, j)].re);
                    if m > 0 && j < i {
                        p.push(a[(i, j)].im);
                    }
                }
            }
        }
        p.push(self.nugget_param(model.nugget()));
        p
    }

    pub fn factors(&self, p: &[f64]) -> Vec<DMatrix<C64>> {
        let n_t = self.truncation;
        let mut k = 0;
        (0..=n_t)
            .map(|m| {
                let d = n_t + 1 - m;
                let mut a = DMatrix::zeros(d, d);
                for i in 0..d {
                    for j in 0..=i {
                        if m > 0 && j < i {
                            a[(i, j)] = C64::new(p[k], p[k + 1]);
                            k += 2;
                        } else {
                            a[(i, j)] = C64::new(p[k], 0.0);
                            k += 1;
                        }
                    }
                }
                a
            })
            .collect()
    }

    pub fn from_params(&self, p: &[f64]) -> Result<HarmonicCovariance> {
        HarmonicCovariance::new(
            self.truncation,
            self.factors(p),
            self.nugget_value(p[self.nugget_index()]),
        )
    }

    /// Real factor `F` of `Σ` (see [`HarmonicCovariance::sigma_factor`]).
    pub fn sigma_factor(&self, p: &[f64]) -> DMatrix<f64> {
        let layout = BasisLayout::new(self.truncation);
        let mut f = DMatrix::zeros(layout.dim(), layout.dim());
        crate::covariance::embed_factor(&layout, &self.factors(p), &mut f);
        f
    }

    /// Chain rule from `∂/∂F` (a full `(N+1)^2` square matrix) to the factor
    /// parameters. The nugget slot is left at zero.
    pub fn pull_back(&self, df: &DMatrix<f64>) -> Vec<f64> {
        let layout = BasisLayout::new(self.truncation);
        let mut g = Vec::with_capacity(self.len());
        for i in 0..=self.truncation {
            for j in 0..=i {
                g.push(df[(i, j)]);
            }
        }
        for m in 1..=self.truncation {
            let d = layout.block_len(m);
            let o = layout.offset(m);
            for i in 0..d {
                for j in 0..=i {
                    g.push(df[(o + i, o + j)] + df[(o + d + i, o + d + j)]);
                    if j < i {
                        g.push(df[(o + i, o + d + j)] - df[(o + d + i, o + j)]);
                    }
                }
            }
        }
        g.push(0.0);
        g
    }
}

/// Optimize over the parameters not listed in `frozen`, holding those at
/// their values in `full`.
pub(crate) struct FreeSubset {
    pub full: Vec<f64>,
    pub free: Vec<usize>,
}

impl FreeSubset {
    pub fn new(full: Vec<f64>, frozen: &[usize]) -> Self {
        let free = (0..full.len()).filter(|i| !frozen.contains(i)).collect();
        FreeSubset { full, free }
    }

    pub fn gather(&self) -> Vec<f64> {
        self.free.iter().map(|&i| self.full[i]).collect()
    }

    pub fn scatter(&self, x: &[f64]) -> Vec<f64> {
        let mut p = self.full.clone();
        for (&i, &v) in self.free.iter().zip(x) {
            p[i] = v;
        }
        p
    }

    pub fn restrict(&self, g: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| g[i]).collect()
    }
}
