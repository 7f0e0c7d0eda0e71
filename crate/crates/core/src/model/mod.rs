//! Problem representations shared by every solver: the quadratic-affine
//! instance, iterates, index sets, merit functions and KKT residuals.

mod file;
mod instance;
mod kkt;
mod measures;

pub use file::InstanceFile;
pub use instance::{Dims, Gradient, Iterate, LowerJacobian, LowerLevel, MpecEvaluator, MpecInstance, Objective, UpperSet};
pub use kkt::{estimate_multipliers, kkt_residual, projected_stationarity, MultiplierSet};
pub use measures::{
    default_tolerance, index_sets, lcp_residual, penalty_value, penalty_value_with, phi, phi_general,
    phi_general_gradient, phi_lcp, strict_complementarity, IndexSets, PhiKind,
};
