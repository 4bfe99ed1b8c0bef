//! Command implementations and artifact schemas behind the `tcldispatch`
//! binary. Kept as a library so integration tests can read and write the
//! same artifact documents the binary produces.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use tcl_core::dynamics::EXPORT_GRID_DT;
use tcl_core::segment::{concat_controls, trace_to_csv, AllocationParams};
use tcl_core::{
    is_admissible, optimize_allocation, segment_energy_limits, segment_price, simulate,
    solve_grid, synthesize_plans, validate, Allocation, Direction, Error as CoreError,
    RelaxedPlan, Scenario, Severity, Violation,
};

/// Numeric knobs accepted by every subcommand; unset values fall back to
/// the documented defaults.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub gamma: Option<f64>,
    pub eps_pi: Option<f64>,
    pub dt: Option<f64>,
    pub tm: Option<f64>,
    pub max_iter: Option<usize>,
}

/// Default oracle grid step (hours).
pub const DEFAULT_ORACLE_DT: f64 = 1e-2;

/// Command failure carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or unparsable inputs (exit 2).
    Parse(String),
    /// Scenario rejected by the admissibility checks (exit 3).
    Validation(Vec<Violation>),
    /// The requested plan does not exist within the comfort bands (exit 4).
    Infeasible(String),
    /// An iteration ran out before reaching its tolerance (exit 5).
    NonConvergence(String),
    /// Filesystem trouble (exit 1).
    Io(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::NonConvergence(_) => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Parse(_) => "parse",
            CliError::Validation(_) => "validation",
            CliError::Infeasible(_) => "infeasible",
            CliError::NonConvergence(_) => "non_convergence",
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Io(m) | CliError::Parse(m) | CliError::Infeasible(m)
            | CliError::NonConvergence(m) => m.clone(),
            CliError::Validation(v) => format!(
                "{} violation(s): {}",
                v.len(),
                v.iter()
                    .map(|x| x.message.as_str())
                    .collect::<Vec<_>>()
                    .join("; ")
            ),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::InvalidInput(_)
            | CoreError::ControlCoverage { .. }
            | CoreError::InvalidControlLevel { .. } => CliError::Parse(err.to_string()),
            CoreError::NotConverged { .. } | CoreError::OracleNotConverged { .. } => {
                CliError::NonConvergence(err.to_string())
            }
            _ => CliError::Infeasible(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// `validation.json`
#[derive(Debug, Serialize, Deserialize)]
pub struct ValidationDocument {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

/// `segmentation.json`
#[derive(Debug, Serialize, Deserialize)]
pub struct SegmentationDocument {
    pub boundaries: Vec<f64>,
    pub directions: Vec<Direction>,
    /// Per-segment admissible energy box.
    pub energy_limits: Vec<(f64, f64)>,
}

/// `plan.json`
#[derive(Debug, Serialize, Deserialize)]
pub struct PlanDocument {
    pub total_cost: f64,
    /// Present when the forecast has a single monotone segment.
    pub t_star: Option<f64>,
    /// Present when the forecast has a single monotone segment.
    pub pi_star: Option<f64>,
    pub allocation: Allocation,
    pub segments: Vec<RelaxedPlan>,
}

/// `oracle.json`
#[derive(Debug, Serialize, Deserialize)]
pub struct OracleDocument {
    pub dt: f64,
    pub steps: usize,
    pub cost: f64,
    pub pi_star: f64,
}

/// `synthesis_report.json`
#[derive(Debug, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub period: f64,
    /// Schedule ON time minus planned energy (unit-hours).
    pub energy_deviation: f64,
    pub overshoot: Vec<OvershootEntry>,
}

/// Worst intra-period state deviation per unit and sliding level.
#[derive(Debug, Serialize, Deserialize)]
pub struct OvershootEntry {
    pub unit: usize,
    pub below_upper: f64,
    pub above_lower: f64,
}

/// `compare.json`
#[derive(Debug, Serialize, Deserialize)]
pub struct CompareDocument {
    pub plan_cost: f64,
    pub oracle_cost: f64,
    pub dt: f64,
    pub pass: bool,
    pub gap: f64,
    pub tolerance: f64,
}

fn read_to_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))
}

/// Load and parse a scenario file (exit 2 on failure).
pub fn load_scenario(path: &Path, overrides: &Overrides) -> CliResult<Scenario> {
    let text = read_to_string(path)?;
    let mut scenario: Scenario = serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    if let Some(tm) = overrides.tm {
        scenario.t_min_switch = tm;
    }
    Ok(scenario)
}

/// Run the admissibility checks, failing with exit 3 on any error-severity
/// violation.
pub fn gate_scenario(scenario: &Scenario) -> CliResult<Vec<Violation>> {
    let violations = validate(scenario);
    if is_admissible(&violations) {
        Ok(violations)
    } else {
        Err(CliError::Validation(violations))
    }
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serialize {name}: {e}")))?;
    text.push('\n');
    write_artifact(dir, name, &text)
}

fn allocation_params(overrides: &Overrides) -> AllocationParams {
    let defaults = AllocationParams::default();
    AllocationParams {
        gamma: overrides.gamma.unwrap_or(defaults.gamma),
        eps_pi: overrides.eps_pi.or(defaults.eps_pi),
        max_iter: overrides.max_iter.unwrap_or(defaults.max_iter),
    }
}

/// `validate`: write the admissibility report; exit 3 when inadmissible.
pub fn cmd_validate(scenario_path: &Path, out: &Path, overrides: &Overrides) -> CliResult<()> {
    let scenario = load_scenario(scenario_path, overrides)?;
    let violations = validate(&scenario);
    let ok = is_admissible(&violations);
    let doc = ValidationDocument {
        ok,
        violations: violations.clone(),
    };
    write_json(out, "validation.json", &doc)?;
    for v in &violations {
        let tag = match v.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        println!("{tag}: {}", v.message);
    }
    if ok {
        println!("scenario admissible");
        Ok(())
    } else {
        Err(CliError::Validation(violations))
    }
}

/// `segment`: write the monotone segmentation and per-segment energy boxes.
pub fn cmd_segment(scenario_path: &Path, out: &Path, overrides: &Overrides) -> CliResult<()> {
    let scenario = load_scenario(scenario_path, overrides)?;
    gate_scenario(&scenario)?;
    let seg = segment_price(&scenario.forecast());
    let limits = segment_energy_limits(&seg, &scenario.fleet, scenario.ambient)?;
    let doc = SegmentationDocument {
        boundaries: seg.boundaries.clone(),
        directions: seg.directions.clone(),
        energy_limits: limits,
    };
    write_json(out, "segmentation.json", &doc)?;
    println!(
        "{} monotone segment(s): {:?}",
        seg.len(),
        seg.boundaries
    );
    Ok(())
}

fn build_plan(scenario: &Scenario, overrides: &Overrides) -> CliResult<(PlanDocument, String)> {
    let seg = segment_price(&scenario.forecast());
    let params = allocation_params(overrides);
    let outcome = optimize_allocation(scenario, &seg, &params)?;
    let single = outcome.plans.len() == 1;
    let doc = PlanDocument {
        total_cost: outcome.total_cost,
        t_star: single.then(|| outcome.plans[0].t_star),
        pi_star: single.then(|| outcome.plans[0].pi_star),
        allocation: outcome.allocation,
        segments: outcome.plans,
    };
    Ok((doc, trace_to_csv(&outcome.trace)))
}

/// `plan`: run the full planner and write plan.json, trajectory.csv, and
/// allocation_trace.csv. A non-converged allocation still writes artifacts
/// before exiting 5.
pub fn cmd_plan(scenario_path: &Path, out: &Path, overrides: &Overrides) -> CliResult<()> {
    let scenario = load_scenario(scenario_path, overrides)?;
    gate_scenario(&scenario)?;
    let (doc, trace_csv) = build_plan(&scenario, overrides)?;
    let controls = concat_controls(&doc.segments)?;
    let trajectory = simulate(&controls, &scenario, EXPORT_GRID_DT)?;
    write_json(out, "plan.json", &doc)?;
    write_artifact(out, "trajectory.csv", &trajectory.to_csv())?;
    write_artifact(out, "allocation_trace.csv", &trace_csv)?;
    println!(
        "plan: cost {:.6}, {} segment(s), {} iteration(s)",
        doc.total_cost,
        doc.segments.len(),
        doc.allocation.iterations
    );
    if doc.allocation.converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence(format!(
            "multiplier spread after {} iterations",
            doc.allocation.iterations
        )))
    }
}

fn load_or_build_plan(
    scenario: &Scenario,
    out: &Path,
    overrides: &Overrides,
) -> CliResult<PlanDocument> {
    let path = out.join("plan.json");
    if path.exists() {
        let text = read_to_string(&path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    } else {
        let (doc, trace_csv) = build_plan(scenario, overrides)?;
        write_json(out, "plan.json", &doc)?;
        write_artifact(out, "allocation_trace.csv", &trace_csv)?;
        Ok(doc)
    }
}

/// `synthesize`: turn the plan into ON-OFF schedules; replays plan.json
/// when present so earlier artifacts are authoritative.
pub fn cmd_synthesize(scenario_path: &Path, out: &Path, overrides: &Overrides) -> CliResult<()> {
    let scenario = load_scenario(scenario_path, overrides)?;
    gate_scenario(&scenario)?;
    let doc = load_or_build_plan(&scenario, out, overrides)?;
    let schedule = synthesize_plans(&doc.segments, &scenario)?;
    let planned: f64 = doc.segments.iter().map(|p| p.total_energy()).sum();
    let deviation = schedule.total_on_time() - planned;
    let overshoot = scenario
        .fleet
        .units
        .iter()
        .enumerate()
        .map(|(i, unit)| {
            let bounds = &doc.segments[0].bounds;
            OvershootEntry {
                unit: i,
                below_upper: tcl_core::overshoot_bound(
                    bounds.at_upper,
                    unit,
                    scenario.t_min_switch,
                    scenario.ambient,
                ),
                above_lower: tcl_core::overshoot_bound(
                    bounds.at_lower,
                    unit,
                    scenario.t_min_switch,
                    scenario.ambient,
                ),
            }
        })
        .collect();
    let report = SynthesisReport {
        period: scenario.t_min_switch,
        energy_deviation: deviation,
        overshoot,
    };
    write_artifact(out, "schedule.csv", &schedule.to_csv())?;
    write_json(out, "synthesis_report.json", &report)?;
    println!(
        "schedule: {} interval(s), energy deviation {:+.6}",
        schedule.units.iter().map(|u| u.len()).sum::<usize>(),
        deviation
    );
    Ok(())
}

fn build_oracle(scenario: &Scenario, out: &Path, dt: f64) -> CliResult<OracleDocument> {
    let solution = solve_grid(scenario, dt, 1e-9)?;
    let controls = solution.piecewise_controls()?;
    let trajectory = simulate(&controls, scenario, EXPORT_GRID_DT)?;
    let doc = OracleDocument {
        dt: solution.dt,
        steps: solution.steps,
        cost: solution.cost,
        pi_star: solution.pi_star,
    };
    write_json(out, "oracle.json", &doc)?;
    write_artifact(out, "oracle_trajectory.csv", &trajectory.to_csv())?;
    Ok(doc)
}

/// `oracle`: solve the grid relaxation and export its trajectory.
pub fn cmd_oracle(scenario_path: &Path, out: &Path, overrides: &Overrides) -> CliResult<()> {
    let scenario = load_scenario(scenario_path, overrides)?;
    gate_scenario(&scenario)?;
    let dt = overrides.dt.unwrap_or(DEFAULT_ORACLE_DT);
    let doc = build_oracle(&scenario, out, dt)?;
    println!(
        "oracle: cost {:.6}, multiplier {:.6} at dt {}",
        doc.cost, doc.pi_star, doc.dt
    );
    Ok(())
}

/// `compare`: check the analytic plan cost against the grid oracle,
/// reusing plan.json / oracle.json artifacts when present.
pub fn cmd_compare(scenario_path: &Path, out: &Path, overrides: &Overrides) -> CliResult<()> {
    let scenario = load_scenario(scenario_path, overrides)?;
    gate_scenario(&scenario)?;
    let plan = load_or_build_plan(&scenario, out, overrides)?;
    let oracle_path = out.join("oracle.json");
    let oracle: OracleDocument = if oracle_path.exists() {
        let text = read_to_string(&oracle_path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Parse(format!("{}: {e}", oracle_path.display())))?
    } else {
        build_oracle(&scenario, out, overrides.dt.unwrap_or(DEFAULT_ORACLE_DT))?
    };
    let price_max = scenario.forecast().scan(1024).max;
    let verdict = tcl_core::compare(
        plan.total_cost,
        oracle.cost,
        oracle.dt,
        price_max,
        scenario.fleet.len(),
    );
    let doc = CompareDocument {
        plan_cost: plan.total_cost,
        oracle_cost: oracle.cost,
        dt: oracle.dt,
        pass: verdict.pass,
        gap: verdict.gap,
        tolerance: verdict.tolerance,
    };
    write_json(out, "compare.json", &doc)?;
    println!(
        "compare: {} (gap {:.6}, tolerance {:.6})",
        if doc.pass { "pass" } else { "fail" },
        doc.gap,
        doc.tolerance
    );
    Ok(())
}
