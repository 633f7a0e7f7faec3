//! Axially symmetric Gaussian-process models on the sphere.
//!
//! The crate covers the full pipeline for gridded or swath data on the sphere:
//! a spherical-harmonic mean regression, binned within-orbit variograms,
//! truncated harmonic covariance expansions parameterized by per-wavenumber
//! Cholesky factors, weighted least squares and exact low-rank maximum
//! likelihood, simple kriging, and exact simulation.

pub mod error;
pub mod exec;
pub mod fitting;
pub mod covariance;
pub mod geom;
pub mod harmonics;
pub mod kriging;
pub mod linalg;
pub mod mean;
pub mod model_file;
pub mod observation;
pub mod simulate;
pub mod variogram;

pub use covariance::{
    exp_chordal_cov, gamma_model, param_count, CovarianceModel, ExpChordalModel,
    HarmonicCovariance, SpatialCovariance,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use geom::{central_angle, chordal_distance, lon_diff, GeoPoint};
pub use harmonics::{build_spline_table, real_basis, NormalizedLegendre, Recurrence, SplineTable};
pub use linalg::C64;
pub use mean::{bin_average, fit_mean, residuals, BinAverage, MeanModel};
pub use observation::{Observation, Orbit};
pub use nalgebra;
pub use variogram::{bin_variogram, cross_orbit_variogram, PairConfig, VariogramRecord};
