//! Minimum-cost consumption planning for fleets of thermostatically
//! controlled loads: closed-form relaxed plans over monotone price segments,
//! multiplier-balanced budget allocation across segments, ON-OFF schedule
//! synthesis, and an independent grid oracle for validation.

pub mod certificate;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod monotone;
pub mod oracle;
pub mod segment;
pub mod synthesis;
pub mod testdata;

pub use certificate::{verify_certificate, CertificateOptions, CertificateReport};
pub use dynamics::{cost, simulate, step, PiecewiseControl, Trajectory};
pub use error::{Error, Result};
pub use model::{
    boundary_controls, feasible_energy_range, is_admissible, validate, AcUnit, BoundaryControls,
    Fleet, PriceCurve, PriceForecast, Scenario, Severity, Violation, ViolationKind,
};
pub use monotone::{
    drain_time_u_to_l, drift_time_l_to_u, entry_time_l, solve_decreasing, solve_increasing,
    solve_segment, Direction, RelaxedPlan, SegmentProblem,
};
pub use oracle::{compare, solve_grid, CompareVerdict, GridProblem, GridSolution};
pub use segment::{
    evaluate_allocation, initial_allocation, optimize_allocation, segment_energy_limits,
    segment_price, Allocation, AllocationOutcome, AllocationParams, Segmentation,
};
pub use synthesis::{
    duty_on_time, duty_on_time_off_first, energy_deviation, overshoot_bound, synthesize,
    synthesize_plans, SwitchInterval, SwitchSchedule,
};
