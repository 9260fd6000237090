//! Count-data modeling built around the type-1 discrete Weibull distribution:
//! the distribution itself, maximum-likelihood fitting, a quantile-oriented
//! regression with Poisson and negative binomial baselines, residual and
//! dispersion diagnostics, and a Monte Carlo harness.
//!
//! The discrete Weibull fills the gap the classical baselines leave open: with
//! shape β ≤ 1 it is overdispersed relative to Poisson at every q, with β ≥ 2
//! underdispersed at every q, and in between the direction depends on q — so
//! one family covers both regimes. Its regression models the conditional
//! *median* (and any other quantile) in closed form rather than the mean.

pub mod dataset;
pub mod diagnostics;
pub mod distribution;
mod error;
pub mod estimate;
pub mod optimize;
pub mod regression;
pub mod simulate;
mod special;

pub use dataset::{Dataset, INTERCEPT_NAME};
pub use diagnostics::{
    dispersion_ratio_report, frequency_table, ks_normality_test, likelihood_ratio_test,
    qq_envelope, randomized_quantile_residuals, randomized_quantile_residuals_iid,
    DispersionReport, FrequencyTable, GroupDispersion, LrTest, QQEnvelope, ResidualReport,
};
pub use distribution::{DWParams, TruncationPolicy};
pub use error::{Error, Result};
pub use estimate::{dw_neg_loglik, fit_dw_mle, wald_interval, ConfidenceInterval, FitResult};
pub use optimize::{numeric_hessian, OptimizerConfig};
pub use regression::{
    fit_dw_regression, fit_dw_regression_with, fit_nb_regression, fit_poisson_glm,
    q_from_linear_predictor, CoefficientInterpretation, CountModel, DWRegressionFit,
    NBRegressionFit, PoissonRegressionFit,
};
pub use simulate::{
    default_dispersion_grids, dispersion_map, run_simulation_study, simulate_regression_data,
    theoretical_vr_poisson, CovariateSpec, DispersionCell, DispersionMap, ParameterSummary,
    SimulationStudyConfig, StudyResult,
};
