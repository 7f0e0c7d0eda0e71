//! Solver reports and per-iteration trace rows.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::linalg::Vector;
use crate::model::Iterate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    /// Feasibility reached but the stationarity check failed: the step bound
    /// shrank with the infeasibility before the upper level settled.
    PossibleNonstationary,
    /// Stationary on the selected piece while another piece still offers
    /// descent.
    PieceStationary,
    MaxIterations,
    LineSearchFailed,
    Stalled,
    Diverged,
}

impl Termination {
    pub fn is_converged(self) -> bool {
        self == Termination::Converged
    }
}

/// Outcome of the penalty dichotomy for the interior methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyBranch {
    Bounded,
    /// The penalty parameter hit its cap.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
}

impl From<&Iterate> for Point {
    fn from(u: &Iterate) -> Self {
        let v = |a: &Vector| a.iter().copied().collect();
        Point { x: v(&u.x), y: v(&u.y), w: v(&u.w), z: v(&u.z) }
    }
}

impl Point {
    pub fn to_iterate(&self) -> Iterate {
        Iterate::from_slices(&self.x, &self.y, &self.w, &self.z)
    }
}

/// One trace line. Module-specific fields are omitted when unset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub phi: f64,
    #[serde(rename = "P_alpha")]
    pub p_alpha: Option<f64>,
    pub alpha: Option<f64>,
    pub mu: f64,
    pub tau: Option<f64>,
    pub norm_dx: f64,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding_condition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subproblem_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_solves: Option<usize>,
    #[serde(rename = "piece_J2", default, skip_serializing_if = "Option::is_none")]
    pub piece_j2: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub algorithm: String,
    pub status: Termination,
    /// Accepted steps.
    pub iterations: usize,
    pub final_point: Point,
    /// Objective at the reported point. Interior methods on LCP instances
    /// report the lower-level-feasible point `(x, ybar(x))`.
    pub final_value: f64,
    /// Objective at the raw last iterate when it differs from `final_point`.
    pub raw_value: Option<f64>,
    pub final_phi: f64,
    pub stationarity_residual: Option<f64>,
    /// Tolerance used to classify the terminal point.
    pub classification_tol: f64,
    pub penalty_branch: Option<PenaltyBranch>,
    pub final_alpha: Option<f64>,
    /// Iterations at which the penalty parameter was increased.
    pub penalty_updates: Vec<usize>,
    /// The terminal lower-level solution has a nonempty degenerate set.
    pub degenerate_terminal: bool,
    pub lower_solves: usize,
    pub trace: Vec<TraceRow>,
}

impl SolveReport {
    pub fn new(algorithm: &str, start: &Iterate) -> Self {
        SolveReport {
            algorithm: algorithm.to_string(),
            status: Termination::MaxIterations,
            iterations: 0,
            final_point: Point::from(start),
            final_value: f64::NAN,
            raw_value: None,
            final_phi: f64::NAN,
            stationarity_residual: None,
            classification_tol: 0.0,
            penalty_branch: None,
            final_alpha: None,
            penalty_updates: Vec::new(),
            degenerate_terminal: false,
            lower_solves: 0,
            trace: Vec::new(),
        }
    }

    /// Writes the trace as JSON lines.
    pub fn write_trace<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in &self.trace {
            serde_json::to_writer(&mut out, row)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            status: self.status,
            iters: self.iterations,
            final_phi: self.final_phi,
            final_value: self.final_value,
            stationarity_residual: self.stationarity_residual,
        }
    }
}

/// Compact report written by the command-line front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub status: Termination,
    pub iters: usize,
    pub final_phi: f64,
    pub final_value: f64,
    pub stationarity_residual: Option<f64>,
}
