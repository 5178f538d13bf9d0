//! Minimax random designs for weighted least squares under misspecification.
//!
//! Predictors are drawn from a design density π and a linear model is fitted
//! by weighted least squares with weights λ/π. The crate builds the design
//! minimizing worst-case asymptotic risk, evaluates risks exactly by
//! quadrature, and runs seeded Monte Carlo studies of the estimator.

pub mod basis;
pub mod benchmarks;
pub mod cli;
pub mod config;
pub mod design;
pub mod error;
pub mod figures;
pub mod linalg;
pub mod quadrature;
pub mod risk;
pub mod sampling;
pub mod sim;
pub mod wls;

pub use basis::{
    best_linear_coefficients, best_linear_coefficients_under_design, calibrate_leading_coefficient, deviation_norm,
    BasisContext, BasisFunction, BasisKind, CoefficientVector, Interval, MeanFunction, ScalarFn, Weight,
};
pub use design::{
    build_design, f_value, implied_sigma2, level_partition, sigma2_min, solve_threshold, DesignDensity,
    DesignFamily, LevelSetPartition, Sigma2,
};
pub use error::{Error, Result};
pub use risk::{minimax_criterion, omega_trace, worst_case_risk, RiskReport, VarianceSpec};
pub use sampling::RngStream;
pub use sim::{convergence_study, event_frequency, run_experiment, SimConfig, SimResult};
pub use wls::{fit_ols, fit_wls, integrated_squared_error, Dataset, WlsFit};
