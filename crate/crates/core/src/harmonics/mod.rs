//! Associated Legendre functions, the spline lookup table, and the real
//! harmonic bases built on them.

pub mod basis;
pub mod legendre;
pub mod spline;

pub use basis::{
    basis_matrix, mean_design_row, mean_design_terms, real_basis, BasisLayout, Trig,
    MEAN_COVARIATES, MEAN_DESIGN_LEN,
};
pub use legendre::{legendre_assoc, legendre_norm, HarmonicIndex, NormalizedLegendre, Recurrence};
pub use spline::{build_spline_table, SplineTable};
