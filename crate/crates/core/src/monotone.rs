//! Closed-form optimal plans for a homogeneous fleet over one monotone price
//! segment.
//!
//! Under an increasing price the optimum consumes as early as possible: full
//! duty until the lower bound, slide there until the common switch time, then
//! coast and slide along the upper bound. The decreasing case mirrors this.
//! The switch time solves the energy equation by bisection; the equation's
//! left-hand side is piecewise smooth and monotone in the switch time, so
//! bisection is unconditionally convergent.

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, PiecewiseControl};
use crate::error::{Error, Result};
use crate::model::{
    boundary_controls, AcUnit, BoundaryControls, Fleet, PriceForecast,
};

/// Absolute tolerance on the switch time found by bisection.
pub const T_STAR_TOL: f64 = 1e-10;

/// Slack applied when locating the boundary/interior multiplier case.
const CASE_TOL: f64 = 1e-9;

/// Zero-length threshold for dropped phases.
const PHASE_EPS: f64 = 1e-12;

/// Monotone direction of a price segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Time for the state to fall from `x0` to the lower bound under full duty.
/// Zero when already there; an error when the unit cannot reach it.
pub fn entry_time_l_from(unit: &AcUnit, ambient: f64, x0: f64) -> Result<f64> {
    let shift = unit.beta / unit.alpha - ambient;
    let den = unit.lower + shift;
    let num = x0 + shift;
    if den <= 0.0 || num <= 0.0 {
        return Err(Error::BoundaryUnreachable {
            unit: 0,
            boundary: "lower",
            from: x0,
        });
    }
    let ratio = num / den;
    if ratio < 1.0 - 1e-12 {
        return Err(Error::BoundaryUnreachable {
            unit: 0,
            boundary: "lower",
            from: x0,
        });
    }
    Ok(ratio.max(1.0).ln() / unit.alpha)
}

/// Entry time to the lower bound starting from the unit's own `x0`.
pub fn entry_time_l(unit: &AcUnit, ambient: f64) -> Result<f64> {
    entry_time_l_from(unit, ambient, unit.x0)
}

/// Time to drift from the lower to the upper bound with zero control.
pub fn drift_time_l_to_u(unit: &AcUnit, ambient: f64) -> f64 {
    ((ambient - unit.lower) / (ambient - unit.upper)).ln() / unit.alpha
}

/// Time to drain from the upper to the lower bound under full duty.
pub fn drain_time_u_to_l(unit: &AcUnit, ambient: f64) -> Result<f64> {
    let shift = unit.beta / unit.alpha - ambient;
    let num = unit.upper + shift;
    let den = unit.lower + shift;
    if num <= 0.0 || den <= 0.0 {
        return Err(Error::BoundaryUnreachable {
            unit: 0,
            boundary: "lower",
            from: unit.upper,
        });
    }
    Ok((num / den).ln() / unit.alpha)
}

/// Time to drift from `x0` up to the upper bound with zero control.
pub fn coast_time_to_upper(unit: &AcUnit, ambient: f64, x0: f64) -> f64 {
    let ratio = (ambient - x0) / (ambient - unit.upper);
    (ratio.max(1.0).ln() / unit.alpha).max(0.0)
}

/// Feasible energy range over `duration` hours for the given entry
/// temperatures: the minimum coasts up and then holds the upper bound, the
/// maximum drains at full duty and then holds the lower bound.
pub fn energy_range_from(
    fleet: &Fleet,
    ambient: f64,
    temps: &[f64],
    duration: f64,
) -> Result<(f64, f64)> {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for (unit, &x0) in fleet.units.iter().zip(temps) {
        let bounds = boundary_controls(unit, ambient)?;
        let coast = coast_time_to_upper(unit, ambient, x0);
        let drain = entry_time_l_from(unit, ambient, x0)?;
        lo += bounds.at_upper * (duration - coast).max(0.0);
        hi += drain.min(duration) + bounds.at_lower * (duration - drain).max(0.0);
    }
    Ok((lo, hi))
}

/// One monotone-price segment problem: a fleet, the price over an absolute
/// window, the energy assigned to the window, and the fleet temperatures at
/// the window start.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentProblem {
    pub fleet: Fleet,
    pub price: PriceForecast,
    pub start: f64,
    pub end: f64,
    pub direction: Direction,
    pub ambient: f64,
    pub energy: f64,
    pub initial_temps: Vec<f64>,
}

/// Spacing of the grid used to verify the stated monotone direction.
const DIRECTION_GRID_DT: f64 = 1e-3;

impl SegmentProblem {
    pub fn new(
        fleet: Fleet,
        price: PriceForecast,
        start: f64,
        end: f64,
        direction: Direction,
        ambient: f64,
        energy: f64,
        initial_temps: Vec<f64>,
    ) -> Result<Self> {
        if !(end > start) {
            return Err(Error::InvalidInput(format!(
                "segment window [{start}, {end}] is empty"
            )));
        }
        if initial_temps.len() != fleet.len() {
            return Err(Error::InvalidInput(format!(
                "{} entry temperatures for {} units",
                initial_temps.len(),
                fleet.len()
            )));
        }
        for (unit, &x0) in fleet.units.iter().zip(&initial_temps) {
            if x0 < unit.lower - 1e-9 || x0 > unit.upper + 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "entry temperature {x0} outside band [{}, {}]",
                    unit.lower, unit.upper
                )));
            }
        }
        let problem = Self {
            fleet,
            price,
            start,
            end,
            direction,
            ambient,
            energy,
            initial_temps,
        };
        problem.check_direction()?;
        let (lo, hi) = problem.feasible_energy()?;
        if energy < lo - 1e-8 || energy > hi + 1e-8 {
            return Err(Error::InfeasibleEnergy {
                energy,
                min: lo,
                max: hi,
            });
        }
        Ok(problem)
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Feasible energy range for this window and these entry temperatures.
    pub fn feasible_energy(&self) -> Result<(f64, f64)> {
        energy_range_from(
            &self.fleet,
            self.ambient,
            &self.initial_temps,
            self.duration(),
        )
    }

    fn check_direction(&self) -> Result<()> {
        let steps = ((self.duration() / DIRECTION_GRID_DT).ceil() as usize).clamp(1, 200_000);
        let scan = self.price.scan(64);
        let tol = 1e-8 * (1.0 + scan.max.abs().max(scan.min.abs()));
        let mut prev = self.price.value(self.start);
        for k in 1..=steps {
            let t = self.start + self.duration() * k as f64 / steps as f64;
            let v = self.price.value(t);
            let ok = match self.direction {
                Direction::Increasing => v >= prev - tol,
                Direction::Decreasing => v <= prev + tol,
            };
            if !ok {
                return Err(Error::NonMonotonePrice {
                    expected: match self.direction {
                        Direction::Increasing => "increasing",
                        Direction::Decreasing => "decreasing",
                    },
                    start: self.start,
                    end: self.end,
                });
            }
            prev = v;
        }
        Ok(())
    }
}

/// The relaxed optimal plan over one segment: per-unit piecewise-constant
/// controls over the four admissible levels, the common switch time, the
/// boundary entry instants, the segment multiplier, and the exact cost.
///
/// All times are absolute. Entry instants are nominal: an entry beyond the
/// window end means the unit never reaches that boundary in the window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxedPlan {
    pub window: (f64, f64),
    pub direction: Direction,
    pub bounds: BoundaryControls,
    pub controls: Vec<PiecewiseControl>,
    pub t_star: f64,
    pub entry_times_lower: Vec<f64>,
    pub entry_times_upper: Vec<f64>,
    pub pi_star: f64,
    pub cost: f64,
    pub energy: f64,
    pub final_temps: Vec<f64>,
}

impl RelaxedPlan {
    /// Total planned consumption in unit-hours.
    pub fn total_energy(&self) -> f64 {
        self.controls.iter().map(|c| c.energy()).sum()
    }
}

/// Per-unit quantities reused by the energy equation and phase assembly.
struct UnitGeometry {
    unit: AcUnit,
    x0: f64,
    /// Full-duty entry time to L (increasing) in window-local time.
    entry_lower: f64,
    /// Zero-duty entry time to U (decreasing) in window-local time.
    entry_upper: f64,
}

struct Geometry {
    units: Vec<UnitGeometry>,
    bounds: BoundaryControls,
    /// L-to-U drift time shared under equal dynamics.
    drift: f64,
    /// U-to-L drain time shared under equal dynamics.
    drain: f64,
    duration: f64,
    ambient: f64,
}

impl Geometry {
    fn build(problem: &SegmentProblem) -> Result<Self> {
        if !problem.fleet.is_homogeneous() {
            return Err(Error::HeterogeneousFleet);
        }
        let first = &problem.fleet.units[0];
        let bounds = boundary_controls(first, problem.ambient)?;
        let drift = drift_time_l_to_u(first, problem.ambient);
        let drain = drain_time_u_to_l(first, problem.ambient)?;
        let mut units = Vec::with_capacity(problem.fleet.len());
        for (unit, &x0) in problem.fleet.units.iter().zip(&problem.initial_temps) {
            units.push(UnitGeometry {
                unit: *unit,
                x0,
                entry_lower: entry_time_l_from(unit, problem.ambient, x0)?,
                entry_upper: coast_time_to_upper(unit, problem.ambient, x0),
            });
        }
        Ok(Self {
            units,
            bounds,
            drift,
            drain,
            duration: problem.duration(),
            ambient: problem.ambient,
        })
    }

    /// Coast anchor for the increasing case: time from the switch state to
    /// the upper bound. Equals the L-to-U drift once the unit has reached L.
    fn coast_anchor(&self, g: &UnitGeometry, t_star: f64) -> f64 {
        if t_star >= g.entry_lower {
            self.drift
        } else {
            let x = dynamics::step(g.x0, 1.0, t_star, &g.unit, self.ambient);
            coast_time_to_upper(&g.unit, self.ambient, x)
        }
    }

    /// Drain anchor for the decreasing case: time from the switch state to
    /// the lower bound under full duty.
    fn drain_anchor(&self, g: &UnitGeometry, t_star: f64) -> Result<f64> {
        if t_star >= g.entry_upper {
            Ok(self.drain)
        } else {
            let x = dynamics::step(g.x0, 0.0, t_star, &g.unit, self.ambient);
            entry_time_l_from(&g.unit, self.ambient, x)
        }
    }

    /// Exact consumed energy of the increasing four-phase plan as a function
    /// of the switch time. Continuous and nondecreasing.
    fn energy_increasing(&self, t_star: f64) -> f64 {
        self.units
            .iter()
            .map(|g| {
                if t_star >= g.entry_lower {
                    g.entry_lower
                        + self.bounds.at_lower * (t_star - g.entry_lower)
                        + self.bounds.at_upper * (self.duration - t_star - self.drift).max(0.0)
                } else {
                    let tail = self.duration - t_star - self.coast_anchor(g, t_star);
                    t_star + self.bounds.at_upper * tail.max(0.0)
                }
            })
            .sum()
    }

    /// Exact consumed energy of the decreasing four-phase plan as a function
    /// of the switch time. Continuous and nonincreasing.
    fn energy_decreasing(&self, t_star: f64) -> Result<f64> {
        let mut total = 0.0;
        for g in &self.units {
            let anchor = self.drain_anchor(g, t_star)?;
            let ride = self.bounds.at_upper * (t_star - g.entry_upper).max(0.0);
            let drain = anchor.min((self.duration - t_star).max(0.0));
            let hold = self.bounds.at_lower * (self.duration - t_star - anchor).max(0.0);
            total += ride + drain + hold;
        }
        Ok(total)
    }
}

/// Bisection for the switch time: `energy(t)` is monotone with the stated
/// sense, and the target is bracketed by the window endpoints.
fn bisect_switch_time(
    energy: impl Fn(f64) -> Result<f64>,
    duration: f64,
    target: f64,
    increasing: bool,
) -> Result<f64> {
    let at_zero = energy(0.0)?;
    let at_end = energy(duration)?;
    let (min_e, max_e) = if increasing {
        (at_zero, at_end)
    } else {
        (at_end, at_zero)
    };
    if target < min_e - 1e-8 || target > max_e + 1e-8 {
        return Err(Error::InfeasibleEnergy {
            energy: target,
            min: min_e,
            max: max_e,
        });
    }
    let target = target.clamp(min_e, max_e);
    // Snap to the window endpoints so budgets at the feasible extremes do
    // not leave sliver phases behind.
    if (target - at_zero).abs() <= 1e-9 {
        return Ok(0.0);
    }
    if (target - at_end).abs() <= 1e-9 {
        return Ok(duration);
    }
    let (mut lo, mut hi) = (0.0, duration);
    for _ in 0..200 {
        if hi - lo <= T_STAR_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let e = energy(mid)?;
        let undershoot = if increasing { e < target } else { e > target };
        if undershoot {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Assemble a piecewise control from `(level, start, end)` phases in local
/// time, dropping empty phases and merging equal neighbours.
fn build_control(phases: &[(f64, f64, f64)], offset: f64, duration: f64) -> Result<PiecewiseControl> {
    let mut breakpoints = vec![offset];
    let mut values: Vec<f64> = Vec::new();
    for &(level, a, b) in phases {
        let len = b.min(duration) - a.max(0.0);
        if len <= PHASE_EPS {
            continue;
        }
        let end = offset + b.min(duration);
        if let Some(last) = values.last() {
            if (last - level).abs() <= PHASE_EPS {
                *breakpoints.last_mut().unwrap() = end;
                continue;
            }
        }
        values.push(level);
        breakpoints.push(end);
    }
    *breakpoints.last_mut().unwrap() = offset + duration;
    PiecewiseControl::new(breakpoints, values)
}

/// Two-case multiplier: the price at the switch time when trajectories end
/// inside the band, otherwise the exponential-weighted difference quotient
/// across the boundary-entry interval `anchor`.
fn multiplier(
    price: &PriceForecast,
    t_star_abs: f64,
    anchor: f64,
    alpha: f64,
    remaining: f64,
) -> f64 {
    if remaining >= anchor - CASE_TOL && anchor > PHASE_EPS {
        let growth = (alpha * anchor).exp();
        (price.value(t_star_abs + anchor) - price.value(t_star_abs) * growth) / (1.0 - growth)
    } else {
        price.value(t_star_abs)
    }
}

/// Closed-form plan for an increasing price segment.
pub fn solve_increasing(problem: &SegmentProblem) -> Result<RelaxedPlan> {
    if problem.direction != Direction::Increasing {
        return Err(Error::NonMonotonePrice {
            expected: "increasing",
            start: problem.start,
            end: problem.end,
        });
    }
    let geo = Geometry::build(problem)?;
    let duration = geo.duration;
    let t_star = bisect_switch_time(
        |t| Ok(geo.energy_increasing(t)),
        duration,
        problem.energy,
        true,
    )?;

    let mut controls = Vec::with_capacity(geo.units.len());
    let mut entry_lower = Vec::with_capacity(geo.units.len());
    let mut entry_upper = Vec::with_capacity(geo.units.len());
    let mut final_temps = Vec::with_capacity(geo.units.len());
    for g in &geo.units {
        let to_upper = t_star + geo.coast_anchor(g, t_star);
        let first_switch = g.entry_lower.min(t_star);
        let control = build_control(
            &[
                (1.0, 0.0, first_switch),
                (geo.bounds.at_lower, first_switch, t_star),
                (0.0, t_star, to_upper.min(duration)),
                (geo.bounds.at_upper, to_upper.min(duration), duration),
            ],
            problem.start,
            duration,
        )?;
        final_temps.push(control.propagate(g.x0, &g.unit, geo.ambient));
        entry_lower.push(problem.start + g.entry_lower);
        entry_upper.push(problem.start + to_upper);
        controls.push(control);
    }

    let alpha = geo.units[0].unit.alpha;
    let pi_star = multiplier(
        &problem.price,
        problem.start + t_star,
        geo.drift,
        alpha,
        duration - t_star,
    );
    let cost = dynamics::cost(&controls, &problem.price);
    Ok(RelaxedPlan {
        window: (problem.start, problem.end),
        direction: Direction::Increasing,
        bounds: geo.bounds,
        controls,
        t_star: problem.start + t_star,
        entry_times_lower: entry_lower,
        entry_times_upper: entry_upper,
        pi_star,
        cost,
        energy: problem.energy,
        final_temps,
    })
}

/// Closed-form plan for a decreasing price segment: coast, slide along the
/// upper bound, drain at full duty from the switch time, then slide along
/// the lower bound.
pub fn solve_decreasing(problem: &SegmentProblem) -> Result<RelaxedPlan> {
    if problem.direction != Direction::Decreasing {
        return Err(Error::NonMonotonePrice {
            expected: "decreasing",
            start: problem.start,
            end: problem.end,
        });
    }
    let geo = Geometry::build(problem)?;
    let duration = geo.duration;
    let t_star = bisect_switch_time(
        |t| geo.energy_decreasing(t),
        duration,
        problem.energy,
        false,
    )?;

    let mut controls = Vec::with_capacity(geo.units.len());
    let mut entry_lower = Vec::with_capacity(geo.units.len());
    let mut entry_upper = Vec::with_capacity(geo.units.len());
    let mut final_temps = Vec::with_capacity(geo.units.len());
    for g in &geo.units {
        let to_lower = t_star + geo.drain_anchor(g, t_star)?;
        let first_switch = g.entry_upper.min(t_star);
        let control = build_control(
            &[
                (0.0, 0.0, first_switch),
                (geo.bounds.at_upper, first_switch, t_star),
                (1.0, t_star, to_lower.min(duration)),
                (geo.bounds.at_lower, to_lower.min(duration), duration),
            ],
            problem.start,
            duration,
        )?;
        final_temps.push(control.propagate(g.x0, &g.unit, geo.ambient));
        entry_upper.push(problem.start + g.entry_upper);
        entry_lower.push(problem.start + to_lower);
        controls.push(control);
    }

    let alpha = geo.units[0].unit.alpha;
    let pi_star = multiplier(
        &problem.price,
        problem.start + t_star,
        geo.drain,
        alpha,
        duration - t_star,
    );
    let cost = dynamics::cost(&controls, &problem.price);
    Ok(RelaxedPlan {
        window: (problem.start, problem.end),
        direction: Direction::Decreasing,
        bounds: geo.bounds,
        controls,
        t_star: problem.start + t_star,
        entry_times_lower: entry_lower,
        entry_times_upper: entry_upper,
        pi_star,
        cost,
        energy: problem.energy,
        final_temps,
    })
}

/// Dispatch on the segment's direction.
pub fn solve_segment(problem: &SegmentProblem) -> Result<RelaxedPlan> {
    match problem.direction {
        Direction::Increasing => solve_increasing(problem),
        Direction::Decreasing => solve_decreasing(problem),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testdata;

    fn unit() -> AcUnit {
        AcUnit {
            alpha: 0.1,
            beta: 2.0,
            lower: 18.0,
            upper: 22.0,
            x0: 19.0,
        }
    }

    fn example1_problem() -> SegmentProblem {
        let s = testdata::example1();
        SegmentProblem::new(
            s.fleet.clone(),
            s.forecast(),
            0.0,
            24.0,
            Direction::Increasing,
            s.ambient,
            s.budget,
            s.fleet.initial_temps(),
        )
        .unwrap()
    }

    #[test]
    fn entry_times_match_reference() {
        let u = unit();
        assert!((entry_time_l_from(&u, 30.0, 19.0).unwrap() - 1.1778303).abs() < 1e-4);
        assert!((entry_time_l_from(&u, 30.0, 21.0).unwrap() - 3.1845373).abs() < 1e-4);
        assert_eq!(entry_time_l_from(&u, 30.0, 18.0).unwrap(), 0.0);
    }

    #[test]
    fn drift_time_matches_reference() {
        let u = unit();
        assert!((drift_time_l_to_u(&u, 30.0) - 4.0546511).abs() < 1e-4);
        let collapsed = AcUnit { upper: 18.0, lower: 18.0, ..u };
        assert_eq!(drift_time_l_to_u(&collapsed, 30.0), 0.0);
    }

    #[test]
    fn drift_time_halves_with_double_rate() {
        let u = AcUnit { alpha: 0.2, beta: 4.0, ..unit() };
        let t = drift_time_l_to_u(&u, 30.0);
        assert!((t - 2.0273255).abs() < 1e-6);
        // Independent check: locate the crossing by bisecting the closed-form
        // step map with zero control.
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if dynamics::step(18.0, 0.0, mid, &u, 30.0) < 22.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((t - 0.5 * (lo + hi)).abs() < 1e-9);
    }

    #[test]
    fn drain_time_matches_reference() {
        let u = unit();
        let t = drain_time_u_to_l(&u, 30.0).unwrap();
        assert!((t - 4.0546511).abs() < 1e-6);
        // Cross-check by bisecting the full-duty step map from U down to L.
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if dynamics::step(22.0, 1.0, mid, &u, 30.0) > 18.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((t - 0.5 * (lo + hi)).abs() < 1e-9);
        let collapsed = AcUnit { upper: 18.0, ..u };
        assert_eq!(drain_time_u_to_l(&collapsed, 30.0).unwrap(), 0.0);
    }

    #[test]
    fn drain_time_shrinks_with_stronger_cooling() {
        let mut prev = f64::INFINITY;
        for beta in [2.0, 3.0, 5.0, 10.0, 50.0] {
            let u = AcUnit { beta, ..unit() };
            let t = drain_time_u_to_l(&u, 30.0).unwrap();
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn solve_increasing_reproduces_reference_plan() {
        let plan = solve_increasing(&example1_problem()).unwrap();
        assert!((plan.t_star - 15.7469).abs() < 1e-3, "t* = {}", plan.t_star);
        assert!((plan.pi_star - 8.6376).abs() < 1e-3, "pi* = {}", plan.pi_star);
        for entry in &plan.entry_times_upper {
            assert!((entry - 19.8016).abs() < 1e-3, "t_U = {entry}");
        }
        assert!((plan.entry_times_lower[0] - 1.1778).abs() < 1e-3);
        assert!((plan.entry_times_lower[1] - 3.1845).abs() < 1e-3);
        assert!((plan.total_energy() - 24.0).abs() < 1e-8);
    }

    #[test]
    fn solve_increasing_minimum_energy_never_burns() {
        let s = testdata::example1();
        let temps = s.fleet.initial_temps();
        let (e_min, _) =
            energy_range_from(&s.fleet, s.ambient, &temps, s.horizon).unwrap();
        let problem = SegmentProblem::new(
            s.fleet.clone(),
            s.forecast(),
            0.0,
            24.0,
            Direction::Increasing,
            s.ambient,
            e_min,
            temps,
        )
        .unwrap();
        let plan = solve_increasing(&problem).unwrap();
        assert!(plan.t_star < 1e-6, "t* = {}", plan.t_star);
        for c in &plan.controls {
            assert!(c.values.iter().all(|v| *v < 0.999));
        }
    }

    #[test]
    fn solve_decreasing_pins_upper_boundary_hold() {
        let mut s = testdata::example1();
        s.price = crate::model::PriceCurve::Affine { a: 25.0, b: -1.0 };
        s.fleet.units.truncate(1);
        s.fleet.units[0].x0 = 22.0;
        let bounds = boundary_controls(&s.fleet.units[0], s.ambient).unwrap();
        let problem = SegmentProblem::new(
            s.fleet.clone(),
            s.forecast(),
            0.0,
            24.0,
            Direction::Decreasing,
            s.ambient,
            bounds.at_upper * 24.0,
            vec![22.0],
        )
        .unwrap();
        let plan = solve_decreasing(&problem).unwrap();
        assert_eq!(plan.controls[0].values.len(), 1);
        assert!((plan.controls[0].values[0] - bounds.at_upper).abs() < 1e-9);
        assert!((plan.final_temps[0] - 22.0).abs() < 1e-9);
    }

    #[test]
    fn energy_equation_is_monotone_in_switch_time() {
        let problem = example1_problem();
        let geo = Geometry::build(&problem).unwrap();
        let mut prev_inc = -1.0;
        let mut prev_dec = f64::INFINITY;
        for k in 0..=100 {
            let t = 24.0 * k as f64 / 100.0;
            let inc = geo.energy_increasing(t);
            let dec = geo.energy_decreasing(t).unwrap();
            assert!(inc >= prev_inc - 1e-12, "increasing LHS dipped at {t}");
            assert!(dec <= prev_dec + 1e-12, "decreasing LHS rose at {t}");
            prev_inc = inc;
            prev_dec = dec;
        }
    }

    #[test]
    fn energy_equation_endpoints_match_feasible_range() {
        let problem = example1_problem();
        let geo = Geometry::build(&problem).unwrap();
        let (lo, hi) = problem.feasible_energy().unwrap();
        assert!((geo.energy_increasing(0.0) - lo).abs() < 1e-9);
        assert!((geo.energy_increasing(24.0) - hi).abs() < 1e-9);
        assert!((geo.energy_decreasing(24.0).unwrap() - lo).abs() < 1e-9);
        assert!((geo.energy_decreasing(0.0).unwrap() - hi).abs() < 1e-9);
    }

    #[test]
    fn infeasible_energy_is_rejected() {
        let s = testdata::example1();
        let err = SegmentProblem::new(
            s.fleet.clone(),
            s.forecast(),
            0.0,
            24.0,
            Direction::Increasing,
            s.ambient,
            1000.0,
            s.fleet.initial_temps(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InfeasibleEnergy { .. }));
    }

    #[test]
    fn heterogeneous_fleet_is_rejected() {
        let mut s = testdata::example1();
        s.fleet.units[1].alpha = 0.2;
        s.fleet.units[1].beta = 4.0;
        let problem = SegmentProblem::new(
            s.fleet.clone(),
            s.forecast(),
            0.0,
            24.0,
            Direction::Increasing,
            s.ambient,
            20.0,
            s.fleet.initial_temps(),
        )
        .unwrap();
        assert!(matches!(
            solve_increasing(&problem),
            Err(Error::HeterogeneousFleet)
        ));
    }

    #[test]
    fn direction_mismatch_is_rejected() {
        let problem = example1_problem();
        assert!(matches!(
            solve_decreasing(&problem),
            Err(Error::NonMonotonePrice { .. })
        ));
    }

    #[test]
    fn multiplier_grows_with_budget() {
        let s = testdata::example1();
        let temps = s.fleet.initial_temps();
        let (lo, hi) = energy_range_from(&s.fleet, s.ambient, &temps, 24.0).unwrap();
        let mut prev_t = -1.0;
        let mut prev_pi = f64::NEG_INFINITY;
        for k in 1..20 {
            let e = lo + (hi - lo) * k as f64 / 20.0;
            let problem = SegmentProblem::new(
                s.fleet.clone(),
                s.forecast(),
                0.0,
                24.0,
                Direction::Increasing,
                s.ambient,
                e,
                temps.clone(),
            )
            .unwrap();
            let plan = solve_increasing(&problem).unwrap();
            assert!(plan.t_star >= prev_t - 1e-9, "t* not monotone at {e}");
            assert!(plan.pi_star >= prev_pi - 1e-9, "pi* not monotone at {e}");
            prev_t = plan.t_star;
            prev_pi = plan.pi_star;
        }
    }
}
