//! Computational kernels called by every algorithm: dense linear solves, a
//! convex QP solver with an optional ball constraint, an LCP solver and a
//! sign-constrained least-squares routine.

mod lcp;
mod linear;
mod lsq;
mod qp;

pub use lcp::{solve_lcp, solve_lcp_by_enumeration, solve_lcp_lemke, solve_lcp_with, LcpMethod, LcpSolution, ENUMERATION_LIMIT};
pub use linear::{solve_linear, solve_linear_multi};
pub use lsq::bounded_lstsq;
pub use qp::{solve_qp, Ball, QpProblem, QpSolution, QpStatus};
