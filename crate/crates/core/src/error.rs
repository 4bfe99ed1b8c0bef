//! Error type shared across the solver modules.

use thiserror::Error;

/// Errors produced by scenario handling and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Structurally invalid input data (bad breakpoints, empty fleet, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A sliding control computed from the unit parameters left [0, 1],
    /// so the unit cannot hold a comfort boundary.
    #[error("sliding control {value:.6} for unit {unit} is outside (0, 1)")]
    BoundaryControlOutOfRange { unit: usize, value: f64 },

    /// A comfort boundary cannot be reached from the given state.
    #[error("unit {unit} cannot reach the {boundary} boundary from {from:.4}")]
    BoundaryUnreachable {
        unit: usize,
        boundary: &'static str,
        from: f64,
    },

    /// The closed-form segment solver only covers fleets with equal dynamics.
    #[error("fleet is heterogeneous; use the grid oracle for mixed dynamics")]
    HeterogeneousFleet,

    /// Price direction of the segment does not match the requested solve.
    #[error("price is not {expected} on [{start:.4}, {end:.4}]")]
    NonMonotonePrice {
        expected: &'static str,
        start: f64,
        end: f64,
    },

    /// Requested energy cannot be spent on the segment within the band.
    #[error("energy {energy:.6} outside feasible range [{min:.6}, {max:.6}]")]
    InfeasibleEnergy { energy: f64, min: f64, max: f64 },

    /// No allocation satisfies the per-segment boxes and the total budget.
    #[error("no admissible allocation: budget {budget:.6} vs bounds [{min:.6}, {max:.6}]")]
    InfeasibleAllocation { budget: f64, min: f64, max: f64 },

    /// Iterative allocation ran out of iterations before the multiplier
    /// spread fell below the stopping tolerance.
    #[error("allocation did not converge in {iterations} iterations (spread {spread:.6})")]
    NotConverged { iterations: usize, spread: f64 },

    /// A control trajectory carried a level outside {0, 1, u_bar, u_under}.
    #[error("control level {value:.6} is not one of the admissible levels")]
    InvalidControlLevel { value: f64 },

    /// Controls do not cover the scenario horizon.
    #[error("control breakpoints [{start:.4}, {end:.4}] do not cover [0, {horizon:.4}]")]
    ControlCoverage { start: f64, end: f64, horizon: f64 },

    /// The grid oracle declared the discretized problem infeasible.
    #[error("grid problem is infeasible")]
    OracleInfeasible,

    /// The grid oracle stopped without reaching its optimality tolerance.
    #[error("grid solve did not converge: {status}")]
    OracleNotConverged { status: String },
}

pub type Result<T> = std::result::Result<T, Error>;
