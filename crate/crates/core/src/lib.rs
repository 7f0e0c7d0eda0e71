//! Solvers for mathematical programs with equilibrium constraints over a
//! quadratic objective and an affine lower level.
//!
//! Four algorithms share one instance model:
//! [`pipa`] (penalty interior point), [`pipa_lcp`] (its monotone-LCP variant),
//! [`implicit`] (descent along the lower-level solution map) and [`psqp`]
//! (SQP on one complementarity piece at a time). [`oracle`] enumerates
//! pieces to provide ground truth.

pub mod error;
pub mod generate;
pub mod implicit;
pub mod instances;
pub mod linalg;
pub mod matrix_props;
pub mod model;
pub mod oracle;
pub mod par;
pub mod pipa;
pub mod pipa_lcp;
pub mod psqp;
pub mod report;
pub mod subsolvers;

pub use error::{MpecError, Result};
pub use par::Execution;
