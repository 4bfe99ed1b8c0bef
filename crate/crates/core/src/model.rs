//! Domain types for fleets, price forecasts, and planning scenarios, plus the
//! feasibility checks that gate every solver entry point.
//!
//! All types are immutable after construction and every operation here is a
//! pure function, so unrestricted concurrent use is safe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monotone;

/// Absolute tolerance for floating-point invariant checks.
pub const CHECK_TOL: f64 = 1e-9;

/// One thermostatically controlled load (an AC unit).
///
/// Units: `alpha` in 1/hour, `beta` in degC/hour at full duty, temperatures
/// in degC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcUnit {
    /// Thermal loss rate towards ambient.
    pub alpha: f64,
    /// Cooling gain of the compressor at full duty.
    pub beta: f64,
    /// Comfort band lower bound L.
    pub lower: f64,
    /// Comfort band upper bound U.
    pub upper: f64,
    /// Indoor temperature at the start of the horizon.
    pub x0: f64,
}

impl AcUnit {
    /// True when both units share thermal coefficients and comfort band
    /// (initial temperatures may differ).
    pub fn same_dynamics(&self, other: &AcUnit) -> bool {
        self.alpha == other.alpha
            && self.beta == other.beta
            && self.lower == other.lower
            && self.upper == other.upper
    }
}

/// An ordered collection of units plus the per-unit electrical draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    pub units: Vec<AcUnit>,
    /// Draw of one ON unit in kW. The planner works in unit-hours with the
    /// draw factored out; `power` only scales reported kWh figures.
    pub power: f64,
}

impl Fleet {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Equal-dynamics hypothesis: every unit shares (alpha, beta, lower,
    /// upper). Initial temperatures are allowed to differ.
    pub fn is_homogeneous(&self) -> bool {
        match self.units.split_first() {
            Some((first, rest)) => rest.iter().all(|u| u.same_dynamics(first)),
            None => false,
        }
    }

    /// Initial temperatures in unit order.
    pub fn initial_temps(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.x0).collect()
    }
}

/// Shape of the price forecast over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum PriceCurve {
    /// `pi(t) = a + b t`
    Affine { a: f64, b: f64 },
    /// `pi(t) = c + a sin(omega t + phi)`
    Sinusoid { c: f64, a: f64, omega: f64, phi: f64 },
    /// Piecewise-linear interpolation through `(t, pi)` samples.
    Sampled { points: Vec<(f64, f64)> },
}

/// A price forecast: a curve together with the horizon it covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceForecast {
    pub curve: PriceCurve,
    /// Horizon T in hours; the curve must be defined on [0, T].
    pub horizon: f64,
}

impl PriceForecast {
    pub fn new(curve: PriceCurve, horizon: f64) -> Self {
        Self { curve, horizon }
    }

    /// Price at time `t`. Sampled curves clamp outside their sample span.
    pub fn value(&self, t: f64) -> f64 {
        match &self.curve {
            PriceCurve::Affine { a, b } => a + b * t,
            PriceCurve::Sinusoid { c, a, omega, phi } => c + a * (omega * t + phi).sin(),
            PriceCurve::Sampled { points } => sampled_value(points, t),
        }
    }

    /// Exact integral of the price over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match &self.curve {
            PriceCurve::Affine { a: c0, b: c1 } => c0 * (b - a) + c1 * (b * b - a * a) / 2.0,
            PriceCurve::Sinusoid {
                c,
                a: amp,
                omega,
                phi,
            } => {
                if omega.abs() < 1e-300 {
                    (c + amp * phi.sin()) * (b - a)
                } else {
                    c * (b - a) - amp / omega * ((omega * b + phi).cos() - (omega * a + phi).cos())
                }
            }
            PriceCurve::Sampled { points } => sampled_integral(points, a, b),
        }
    }

    /// Min, max, and mean of the price over `[0, horizon]`, evaluated on a
    /// uniform scan grid. Used for tolerance models and stopping defaults.
    pub fn scan(&self, samples: usize) -> PriceScan {
        let n = samples.max(2);
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for k in 0..n {
            let t = self.horizon * k as f64 / (n - 1) as f64;
            let v = self.value(t);
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        PriceScan {
            min,
            max,
            mean: sum / n as f64,
        }
    }
}

/// Summary statistics of a price scan.
#[derive(Debug, Clone, Copy)]
pub struct PriceScan {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

fn sampled_value(points: &[(f64, f64)], t: f64) -> f64 {
    match points {
        [] => f64::NAN,
        [only] => only.1,
        _ => {
            let first = points[0];
            let last = points[points.len() - 1];
            if t <= first.0 {
                return first.1;
            }
            if t >= last.0 {
                return last.1;
            }
            let idx = points.partition_point(|p| p.0 <= t);
            let (t0, v0) = points[idx - 1];
            let (t1, v1) = points[idx];
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }
}

fn sampled_integral(points: &[(f64, f64)], a: f64, b: f64) -> f64 {
    // Exact trapezoids over each linear piece clipped to [a, b]; constant
    // extrapolation outside the sample span.
    if points.is_empty() {
        return f64::NAN;
    }
    let mut total = 0.0;
    let first = points[0];
    let last = points[points.len() - 1];
    if a < first.0 {
        total += first.1 * (b.min(first.0) - a).max(0.0);
    }
    if b > last.0 {
        total += last.1 * (b - a.max(last.0)).max(0.0);
    }
    for w in points.windows(2) {
        let (t0, v0) = w[0];
        let (t1, v1) = w[1];
        let lo = a.max(t0);
        let hi = b.min(t1);
        if hi <= lo || t1 <= t0 {
            continue;
        }
        let slope = (v1 - v0) / (t1 - t0);
        let vl = v0 + slope * (lo - t0);
        let vh = v0 + slope * (hi - t0);
        total += 0.5 * (vl + vh) * (hi - lo);
    }
    total
}

/// A complete planning instance.
///
/// Serializes as a single JSON document:
/// `{fleet: {units: [{alpha, beta, lower, upper, x0}], power},
///   price: {variant, ...}, ambient, budget, horizon, t_min_switch}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub fleet: Fleet,
    pub price: PriceCurve,
    /// Constant ambient temperature (degC); must exceed every upper bound.
    pub ambient: f64,
    /// Total energy budget in unit-hours (per-unit draw factored out).
    pub budget: f64,
    /// Planning horizon T in hours.
    pub horizon: f64,
    /// Minimum switching period T_m of the units in hours.
    pub t_min_switch: f64,
}

impl Scenario {
    /// The price forecast over this scenario's horizon.
    pub fn forecast(&self) -> PriceForecast {
        PriceForecast::new(self.price.clone(), self.horizon)
    }
}

/// Sliding control levels for one unit: the duty fractions that zero the
/// dynamics on each comfort boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryControls {
    /// Holds the state at the upper bound U.
    pub at_upper: f64,
    /// Holds the state at the lower bound L; always exceeds `at_upper`.
    pub at_lower: f64,
}

/// Duty levels that let the state slide along each comfort boundary:
/// `(alpha/beta)(ambient - upper)` at U and `(alpha/beta)(ambient - lower)`
/// at L. Both must land strictly inside (0, 1), otherwise the unit cannot
/// hold the boundary and the scenario is rejected.
pub fn boundary_controls(unit: &AcUnit, ambient: f64) -> Result<BoundaryControls> {
    boundary_controls_indexed(unit, ambient, 0)
}

pub(crate) fn boundary_controls_indexed(
    unit: &AcUnit,
    ambient: f64,
    index: usize,
) -> Result<BoundaryControls> {
    let at_upper = unit.alpha / unit.beta * (ambient - unit.upper);
    let at_lower = unit.alpha / unit.beta * (ambient - unit.lower);
    for value in [at_upper, at_lower] {
        if !(value > 0.0 && value < 1.0) || !value.is_finite() {
            return Err(Error::BoundaryControlOutOfRange { unit: index, value });
        }
    }
    Ok(BoundaryControls { at_upper, at_lower })
}

/// Range of budgets that can be spent while the whole fleet respects its
/// comfort bands over the horizon, assuming boundary-to-boundary excursions:
/// the minimum coasts from L and then holds U, the maximum drains from U at
/// full duty and then holds L.
pub fn feasible_energy_range(scenario: &Scenario) -> Result<(f64, f64)> {
    let horizon = scenario.horizon;
    let mut e_min = 0.0;
    let mut e_max = 0.0;
    for (i, unit) in scenario.fleet.units.iter().enumerate() {
        let bounds = boundary_controls_indexed(unit, scenario.ambient, i)?;
        let t_coast = monotone::drift_time_l_to_u(unit, scenario.ambient);
        let t_drain = monotone::drain_time_u_to_l(unit, scenario.ambient)?;
        e_min += bounds.at_upper * (horizon - t_coast).max(0.0);
        e_max += t_drain.min(horizon) + bounds.at_lower * (horizon - t_drain).max(0.0);
    }
    Ok((e_min, e_max))
}

/// Severity of a reported violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// The specific scenario invariant a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    EmptyFleet,
    NonPositivePower,
    NonPositiveCoefficient,
    EmptyComfortBand,
    InitialStateOutOfBand,
    AmbientNotAboveBand,
    BoundaryControlOutOfRange,
    BudgetOutOfRange,
    NonPositiveHorizon,
    NonPositiveSwitchPeriod,
    PriceNotFinite,
    PriceSamplesInvalid,
    SingularPrice,
    NearSingularPrice,
}

/// One failed (or nearly failed) scenario invariant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub severity: Severity,
    pub message: String,
}

impl Violation {
    fn error(kind: ViolationKind, message: String) -> Self {
        Self {
            kind,
            severity: Severity::Error,
            message,
        }
    }

    fn warning(kind: ViolationKind, message: String) -> Self {
        Self {
            kind,
            severity: Severity::Warning,
            message,
        }
    }
}

/// True when the list contains no error-severity violation.
pub fn is_admissible(violations: &[Violation]) -> bool {
    violations.iter().all(|v| v.severity != Severity::Error)
}

/// Check every scenario invariant and report all violations found.
///
/// Violations are data, not failures: the list is empty exactly when the
/// scenario is admissible for planning. Near-singular price shapes are
/// reported as warnings rather than rejections.
pub fn validate(scenario: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();

    if scenario.fleet.is_empty() {
        out.push(Violation::error(
            ViolationKind::EmptyFleet,
            "fleet has no units".into(),
        ));
    }
    if !(scenario.fleet.power > 0.0) {
        out.push(Violation::error(
            ViolationKind::NonPositivePower,
            format!("per-unit power {} must be positive", scenario.fleet.power),
        ));
    }
    if !(scenario.horizon > 0.0) {
        out.push(Violation::error(
            ViolationKind::NonPositiveHorizon,
            format!("horizon {} must be positive", scenario.horizon),
        ));
    }
    if !(scenario.t_min_switch > 0.0) {
        out.push(Violation::error(
            ViolationKind::NonPositiveSwitchPeriod,
            format!(
                "minimum switching period {} must be positive",
                scenario.t_min_switch
            ),
        ));
    }

    let mut units_ok = true;
    for (i, unit) in scenario.fleet.units.iter().enumerate() {
        if !(unit.alpha > 0.0 && unit.beta > 0.0) {
            units_ok = false;
            out.push(Violation::error(
                ViolationKind::NonPositiveCoefficient,
                format!(
                    "unit {i}: alpha {} and beta {} must be strictly positive",
                    unit.alpha, unit.beta
                ),
            ));
        }
        if !(unit.lower < unit.upper) {
            units_ok = false;
            out.push(Violation::error(
                ViolationKind::EmptyComfortBand,
                format!("unit {i}: band [{}, {}] is empty", unit.lower, unit.upper),
            ));
        }
        if unit.x0 < unit.lower - CHECK_TOL || unit.x0 > unit.upper + CHECK_TOL {
            out.push(Violation::error(
                ViolationKind::InitialStateOutOfBand,
                format!(
                    "unit {i}: initial temperature {} outside [{}, {}]",
                    unit.x0, unit.lower, unit.upper
                ),
            ));
        }
        if scenario.ambient <= unit.upper {
            units_ok = false;
            out.push(Violation::error(
                ViolationKind::AmbientNotAboveBand,
                format!(
                    "ambient {} must exceed unit {i} upper bound {}",
                    scenario.ambient, unit.upper
                ),
            ));
        }
    }

    if units_ok {
        for (i, unit) in scenario.fleet.units.iter().enumerate() {
            if let Err(e) = boundary_controls_indexed(unit, scenario.ambient, i) {
                out.push(Violation::error(
                    ViolationKind::BoundaryControlOutOfRange,
                    e.to_string(),
                ));
            }
        }
    }

    out.extend(check_price(scenario));

    // Budget range is only meaningful once the structural checks pass.
    if out.iter().all(|v| v.severity != Severity::Error) {
        match feasible_energy_range(scenario) {
            Ok((e_min, e_max)) => {
                if scenario.budget < e_min - CHECK_TOL || scenario.budget >= e_max {
                    out.push(Violation::error(
                        ViolationKind::BudgetOutOfRange,
                        format!(
                            "budget {} outside feasible range [{:.6}, {:.6})",
                            scenario.budget, e_min, e_max
                        ),
                    ));
                }
            }
            Err(e) => out.push(Violation::error(
                ViolationKind::BoundaryControlOutOfRange,
                e.to_string(),
            )),
        }
    }

    out
}

/// Thresholds for the exponential-coincidence check of the price curve.
const SINGULAR_REL_RESIDUAL: f64 = 1e-9;
const NEAR_SINGULAR_REL_RESIDUAL: f64 = 1e-4;
const SINGULAR_SCAN: usize = 129;

fn check_price(scenario: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let forecast = scenario.forecast();

    if let PriceCurve::Sampled { points } = &scenario.price {
        if points.len() < 2 {
            out.push(Violation::error(
                ViolationKind::PriceSamplesInvalid,
                "sampled price needs at least two points".into(),
            ));
            return out;
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            out.push(Violation::error(
                ViolationKind::PriceSamplesInvalid,
                "sample times must be strictly increasing".into(),
            ));
        }
        let (t_first, t_last) = (points[0].0, points[points.len() - 1].0);
        if t_first > CHECK_TOL || t_last < scenario.horizon - CHECK_TOL {
            out.push(Violation::error(
                ViolationKind::PriceSamplesInvalid,
                format!(
                    "samples cover [{t_first}, {t_last}] but the horizon is [0, {}]",
                    scenario.horizon
                ),
            ));
        }
    }

    if scenario.horizon > 0.0 {
        for k in 0..SINGULAR_SCAN {
            let t = scenario.horizon * k as f64 / (SINGULAR_SCAN - 1) as f64;
            if !forecast.value(t).is_finite() {
                out.push(Violation::error(
                    ViolationKind::PriceNotFinite,
                    format!("price is not finite at t = {t}"),
                ));
                return out;
            }
        }
    }

    // Exponential growth matching a unit's thermal rate makes the switching
    // structure degenerate, so exact coincidence is rejected and a near
    // coincidence is flagged. Only the differentiable variants are checked.
    if matches!(scenario.price, PriceCurve::Sampled { .. }) || !(scenario.horizon > 0.0) {
        return out;
    }
    for (i, unit) in scenario.fleet.units.iter().enumerate() {
        if !(unit.alpha > 0.0) {
            continue;
        }
        if let Some(rel) = exponential_fit_residual(&forecast, unit.alpha) {
            if rel <= SINGULAR_REL_RESIDUAL {
                out.push(Violation::error(
                    ViolationKind::SingularPrice,
                    format!(
                        "price matches an exponential with unit {i} rate {} (relative residual {rel:.2e})",
                        unit.alpha
                    ),
                ));
            } else if rel <= NEAR_SINGULAR_REL_RESIDUAL {
                out.push(Violation::warning(
                    ViolationKind::NearSingularPrice,
                    format!(
                        "price is close to an exponential with unit {i} rate {} (relative residual {rel:.2e})",
                        unit.alpha
                    ),
                ));
            }
        } else {
            // Constant price: coincides with the excluded family for every
            // rate (zero amplitude), which degenerates the switching law.
            out.push(Violation::error(
                ViolationKind::SingularPrice,
                "price is constant over the horizon".into(),
            ));
            break;
        }
    }
    out
}

/// Least-squares residual of fitting `A e^{rate t} + B` to the price over the
/// horizon, relative to the price variation. `None` when the price has no
/// variation to fit against.
fn exponential_fit_residual(forecast: &PriceForecast, rate: f64) -> Option<f64> {
    let n = SINGULAR_SCAN;
    let mut ts = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(n);
    for k in 0..n {
        let t = forecast.horizon * k as f64 / (n - 1) as f64;
        ts.push(t);
        vs.push(forecast.value(t));
    }
    let mean = vs.iter().sum::<f64>() / n as f64;
    let var = vs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let spread = var.sqrt();
    if spread <= 1e-12 * mean.abs().max(1.0) {
        return None;
    }

    // Two-column least squares against [e^{rate t}, 1] via normal equations.
    let e: Vec<f64> = ts.iter().map(|t| (rate * t).exp()).collect();
    let s_ee = e.iter().map(|x| x * x).sum::<f64>();
    let s_e = e.iter().sum::<f64>();
    let s_ev = e.iter().zip(&vs).map(|(x, v)| x * v).sum::<f64>();
    let s_v = vs.iter().sum::<f64>();
    let nn = n as f64;
    let det = s_ee * nn - s_e * s_e;
    if det.abs() < 1e-12 {
        return None;
    }
    let a = (s_ev * nn - s_e * s_v) / det;
    let b = (s_ee * s_v - s_e * s_ev) / det;
    let rss = e
        .iter()
        .zip(&vs)
        .map(|(x, v)| {
            let r = v - (a * x + b);
            r * r
        })
        .sum::<f64>()
        / nn;
    Some(rss.sqrt() / spread)
}
