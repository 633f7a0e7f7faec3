//! Parameter estimation: weighted least squares against binned variograms
//! and maximum likelihood.

pub mod likelihood;
pub mod mle;
pub mod optimize;
pub mod params;
pub mod report;
pub mod wls;

pub use likelihood::{loglik_dense, loglik_lowrank, white_noise_loglik, LowRankGaussian};
pub use mle::{default_harmonic_init, mle_exp_nugget, mle_harmonic, mle_white_noise, MleFit};
pub use optimize::{minimize, OptimConfig, OptimResult, OptimStatus};
pub use params::{NuggetParam, ParamLayout};
pub use report::{harmonic_parameters, write_report, FitReport};
pub use wls::{
    drop_constant_harmonic, wls_criterion, wls_fit_linear, wls_fit_psd, wls_initial_model,
    wls_weights, write_gamma_grid, LinearWlsFit, WlsFit, WlsProblem,
};
