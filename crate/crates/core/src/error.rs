use thiserror::Error;

/// Errors raised by the instance model, the sub-solvers and the MPEC algorithms.
#[derive(Debug, Error)]
pub enum MpecError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("index {0} is not complementary at the classification tolerance")]
    NotComplementary(usize),
    #[error("complementarity variables must be nonnegative")]
    NegativeVariables,
    #[error("instance has no linear-complementarity lower level")]
    WrongForm,
    #[error("point is degenerate (nonempty beta set)")]
    Degenerate,
    #[error("dimension {0} exceeds the enumeration bound {1}")]
    DimensionTooLarge(usize, usize),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("linearized lower-level block is singular")]
    SingularLowerBlock,
    #[error("feasible set is empty")]
    Infeasible,
    #[error("problem is unbounded below")]
    Unbounded,
    #[error("iteration limit reached")]
    MaxIterations,
    #[error("complementarity problem has no solution")]
    NoSolution,
    #[error("line search failed after {0} reductions")]
    LineSearchFailed(usize),
    #[error("no admissible step along the arc")]
    NoAdmissibleStep,
    #[error("arc identity violated: {what} (error {err:.3e})")]
    IdentityViolated { what: &'static str, err: f64 },
    #[error("no branch of the directional complementarity problem is feasible")]
    NoBranchFeasible,
    #[error("piece constraints are inconsistent")]
    InconsistentPiece,
    #[error("iterates diverged")]
    Diverged,
    #[error("no complementarity piece is feasible")]
    NoFeasiblePiece,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MpecError>;
