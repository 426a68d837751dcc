//! Penalized least-squares model selection over nested linear models.
//!
//! The crate covers the whole pipeline for ordered-variable Gaussian
//! regression `Y = Xβ* + ε`:
//!
//! * [`linmodel`]: orthonormalization of the design, the residual profile of
//!   the nested collection and selection by `RSS(m_j) + Kσ²j`.
//! * [`fdrbounds`]: Monte-Carlo estimates of the data-free factors `P_r(K)`,
//!   the explicit lower and upper FDR bounds and the positive floor.
//! * [`estimation`]: slope-heuristic variance, the `K = 4` plug-in truth and
//!   the estimated difference in predictions.
//! * [`calibration`]: data-driven choice of `K` from an FDR-bound threshold
//!   and a prediction-gap threshold.
//! * [`simulation`]: seeded scenario generators, empirical FDR/PR curves and a
//!   V-fold cross-validation baseline.

pub mod calibration;
pub mod error;
pub mod estimation;
pub mod fdrbounds;
pub mod io;
pub mod linmodel;
pub mod numerics;
pub mod seed;
pub mod simulation;

pub use calibration::{calibrate, calibrate_with_table, CalibrationConfig, CalibrationResult, KGrid};
pub use error::{Error, Result};
pub use estimation::{diff_pr, plugin_estimate, slope_sigma2, PluginConfig, PluginEstimate, SlopeFit};
pub use fdrbounds::{
    bound_curve, fdr_factorized, lower_term, pr_monte_carlo, qr_monte_carlo, upper_term, BoundCurve,
    BoundInput, McEstimate, PrTable,
};
pub use linmodel::{fdp, mse, orthonormalize, Dataset, GroundTruth, OrthoBasis, OrthoModel, SelectionResult};
pub use numerics::{chi2_cdf, chi2_sf, erfc, gaussian_cdf, ProbValue};
pub use simulation::{empirical_curves, generate, vfold_cv_select, EmpiricalCurve, Scenario, ScenarioSpec};
