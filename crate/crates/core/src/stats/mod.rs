//! Per-zone statistical models: OLS, PCA, weighted KDE, mixture
//! regression, and the fixed-coefficient baseline.

pub mod cec;
mod kde;
mod mixture;
mod ols;
mod pca;

pub use cec::{cec_model_eval, CecCovariates};
pub use kde::{density_grid, kde, kde_mixture, silverman_bandwidth, DensityCurve, DensityMixture};
pub use mixture::{
    mixture_regression, mixture_regression_em, mixture_regression_runs, EmConfig, Expert,
    MixtureRegressionModel,
};
pub use ols::{
    clustered_regression, ols, regression_points, ClusteredRegression, Covariate, RegressionModel,
};
pub use pca::{near_constant_check, pca, project, reconstruct, zone_pca, NearConstant, PcaResult};
