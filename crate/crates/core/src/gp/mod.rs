//! Gaussian-process regression with kriging standard errors, and the
//! per-zone regression of consumption on income.

mod clustered;
mod grid;
mod kernel;
mod model;

pub use clustered::{
    clustered_gp_regression, gp_on_income, income_consumption_points, CurvePoint, ZoneGp,
    MIN_ZONE_MEMBERS,
};
pub use grid::{log_spaced, GridSpec};
pub use kernel::{kernel, kernel_matrix, KernelParams};
pub use model::{GpModel, GpSummary, Prediction, Standardizer};
