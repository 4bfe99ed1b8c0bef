//! Decomposition of a general price forecast into monotone segments, segment
//! chaining through shared fleet state, and the multiplier-balancing
//! allocation of the energy budget across segments.
//!
//! Each segment's multiplier is the marginal cost of energy placed in that
//! segment; the allocation is optimal exactly when all multipliers agree, so
//! the iteration moves energy away from expensive segments until the spread
//! of multipliers falls below the stopping tolerance.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::PiecewiseControl;
use crate::error::{Error, Result};
use crate::model::{boundary_controls, Fleet, PriceForecast, Scenario};
use crate::monotone::{
    drain_time_u_to_l, drift_time_l_to_u, solve_segment, Direction, RelaxedPlan, SegmentProblem,
};

/// Maximal monotone pieces of a price forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    /// Segment boundaries `0 = t_0 < t_1 < ... < t_M = T`.
    pub boundaries: Vec<f64>,
    /// Direction of each segment; adjacent segments alternate.
    pub directions: Vec<Direction>,
}

impl Segmentation {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Iterate `(start, end, direction)` windows.
    pub fn windows(&self) -> impl Iterator<Item = (f64, f64, Direction)> + '_ {
        self.boundaries
            .windows(2)
            .zip(&self.directions)
            .map(|(w, d)| (w[0], w[1], *d))
    }

    pub fn durations(&self) -> Vec<f64> {
        self.boundaries.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Split the forecast into maximal monotone segments. Stationary points of
/// the differentiable variants are located in closed form; sampled curves
/// break at sign changes of consecutive differences with plateaus merged
/// into the preceding segment. A constant forecast is one increasing
/// segment by convention.
pub fn segment_price(price: &PriceForecast) -> Segmentation {
    let horizon = price.horizon;
    let mut boundaries = vec![0.0];
    match &price.curve {
        crate::model::PriceCurve::Affine { .. } => {}
        crate::model::PriceCurve::Sinusoid { a, omega, phi, .. } => {
            if a.abs() > 0.0 && omega.abs() > 0.0 {
                // Stationary points solve omega t + phi = pi/2 + k pi.
                let half_pi = std::f64::consts::FRAC_PI_2;
                let pi = std::f64::consts::PI;
                let t_of = |k: i64| (half_pi + k as f64 * pi - phi) / omega;
                let k_lo = ((omega.min(0.0) * horizon + phi - half_pi) / pi).floor() as i64 - 2;
                let k_hi = ((omega.max(0.0) * horizon + phi - half_pi) / pi).ceil() as i64 + 2;
                let mut inner: Vec<f64> = (k_lo..=k_hi)
                    .map(t_of)
                    .filter(|t| *t > 1e-9 && *t < horizon - 1e-9)
                    .collect();
                inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
                inner.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
                boundaries.extend(inner);
            }
        }
        crate::model::PriceCurve::Sampled { points } => {
            let scale = points
                .iter()
                .map(|p| p.1.abs())
                .fold(0.0f64, f64::max)
                .max(1.0);
            let tol = 1e-12 * scale;
            let mut current: Option<Direction> = None;
            for w in points.windows(2) {
                let (t0, v0) = w[0];
                let (_, v1) = w[1];
                if t0 <= 0.0 || t0 >= horizon {
                    // Turning points outside the horizon are irrelevant.
                }
                let dir = if v1 > v0 + tol {
                    Some(Direction::Increasing)
                } else if v1 < v0 - tol {
                    Some(Direction::Decreasing)
                } else {
                    None // plateau: merged into the preceding run
                };
                if let Some(d) = dir {
                    if let Some(c) = current {
                        if c != d && t0 > 1e-9 && t0 < horizon - 1e-9 {
                            boundaries.push(t0);
                        }
                    }
                    current = Some(d);
                }
            }
        }
    }
    boundaries.push(horizon);

    // Direction per segment from the sign of the change across it; ties are
    // increasing by convention. Defensive merge of equal neighbours keeps
    // the alternation invariant.
    let scan = price.scan(128);
    let tol = 1e-12 * (1.0 + scan.max.abs().max(scan.min.abs()));
    let mut merged_bounds = vec![boundaries[0]];
    let mut directions: Vec<Direction> = Vec::new();
    for w in boundaries.windows(2) {
        let dir = if price.value(w[1]) >= price.value(w[0]) - tol {
            Direction::Increasing
        } else {
            Direction::Decreasing
        };
        if directions.last() == Some(&dir) {
            *merged_bounds.last_mut().unwrap() = w[1];
        } else {
            directions.push(dir);
            merged_bounds.push(w[1]);
        }
    }
    Segmentation {
        boundaries: merged_bounds,
        directions,
    }
}

/// Admissible energy box for one window duration, assuming
/// boundary-to-boundary excursions.
pub fn limits_for_duration(fleet: &Fleet, ambient: f64, duration: f64) -> Result<(f64, f64)> {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for unit in &fleet.units {
        let bounds = boundary_controls(unit, ambient)?;
        let drift = drift_time_l_to_u(unit, ambient);
        let drain = drain_time_u_to_l(unit, ambient)?;
        lo += bounds.at_upper * (duration - drift).max(0.0);
        hi += drain.min(duration) + bounds.at_lower * (duration - drain).max(0.0);
    }
    Ok((lo, hi))
}

/// Per-segment admissible energy boxes.
pub fn segment_energy_limits(
    segmentation: &Segmentation,
    fleet: &Fleet,
    ambient: f64,
) -> Result<Vec<(f64, f64)>> {
    segmentation
        .durations()
        .iter()
        .map(|d| limits_for_duration(fleet, ambient, *d))
        .collect()
}

/// An energy split across segments with the multipliers it produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Allocation {
    pub energies: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Plans and totals obtained by solving the chained segment problems for a
/// fixed allocation.
#[derive(Debug, Clone)]
pub struct AllocationEvaluation {
    pub plans: Vec<RelaxedPlan>,
    pub multipliers: Vec<f64>,
    pub total_cost: f64,
}

/// One iteration record of the allocation loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocationTraceRow {
    pub energies: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub total_cost: f64,
    pub spread: f64,
}

/// Trace CSV with columns `E_1..E_M, pi_star_1..pi_star_M, total_cost,
/// spread`, one row per iteration, 6-decimal formatting.
pub fn trace_to_csv(rows: &[AllocationTraceRow]) -> String {
    let m = rows.first().map_or(0, |r| r.energies.len());
    let mut out = String::new();
    for j in 1..=m {
        let _ = write!(out, "E_{j},");
    }
    for j in 1..=m {
        let _ = write!(out, "pi_star_{j},");
    }
    out.push_str("total_cost,spread\n");
    for row in rows {
        for e in &row.energies {
            let _ = write!(out, "{e:.6},");
        }
        for p in &row.multipliers {
            let _ = write!(out, "{p:.6},");
        }
        let _ = writeln!(out, "{:.6},{:.6}", row.total_cost, row.spread);
    }
    out
}

/// Solve the chained segment problems left to right for a fixed allocation:
/// each segment starts from the previous segment's final temperatures.
pub fn evaluate_allocation(
    energies: &[f64],
    scenario: &Scenario,
    segmentation: &Segmentation,
) -> Result<AllocationEvaluation> {
    if energies.len() != segmentation.len() {
        return Err(Error::InvalidInput(format!(
            "{} energies for {} segments",
            energies.len(),
            segmentation.len()
        )));
    }
    let forecast = scenario.forecast();
    let mut temps = scenario.fleet.initial_temps();
    let mut plans = Vec::with_capacity(energies.len());
    let mut multipliers = Vec::with_capacity(energies.len());
    let mut total_cost = 0.0;
    for ((start, end, direction), &energy) in segmentation.windows().zip(energies) {
        let problem = SegmentProblem::new(
            scenario.fleet.clone(),
            forecast.clone(),
            start,
            end,
            direction,
            scenario.ambient,
            energy,
            temps,
        )?;
        let plan = solve_segment(&problem)?;
        temps = plan.final_temps.clone();
        multipliers.push(plan.pi_star);
        total_cost += plan.cost;
        plans.push(plan);
    }
    Ok(AllocationEvaluation {
        plans,
        multipliers,
        total_cost,
    })
}

/// Marginal cost of each segment's energy in the chained decomposition,
/// by central differences of the chained total cost. A segment's energy
/// changes the entry temperatures of everything downstream, so the local
/// segment multiplier (which takes the adjoint to vanish at the segment
/// end) understates the coupling except on the final segment; these
/// marginals are the multipliers the balancing iteration must equalize.
pub fn allocation_marginals(
    energies: &[f64],
    scenario: &Scenario,
    segmentation: &Segmentation,
    base: &AllocationEvaluation,
) -> Vec<f64> {
    let cost_at = |e: &[f64]| -> Option<f64> {
        evaluate_allocation(e, scenario, segmentation)
            .ok()
            .map(|ev| ev.total_cost)
    };
    energies
        .iter()
        .enumerate()
        .map(|(j, &ej)| {
            let delta = (1e-5 * ej.abs()).max(1e-6);
            let mut up = energies.to_vec();
            up[j] = ej + delta;
            let mut dn = energies.to_vec();
            dn[j] = ej - delta;
            match (cost_at(&up), cost_at(&dn)) {
                (Some(u), Some(d)) => (u - d) / (2.0 * delta),
                (Some(u), None) => (u - base.total_cost) / delta,
                (None, Some(d)) => (base.total_cost - d) / delta,
                (None, None) => base.multipliers[j],
            }
        })
        .collect()
}

/// Clamp into the boxes, then rescale the non-saturated components so the
/// sum matches the budget; repeats until stable. Falls back to distributing
/// the residual proportionally to the remaining slack when rescaling
/// degenerates.
fn project_allocation(
    mut energies: Vec<f64>,
    limits: &[(f64, f64)],
    total: f64,
) -> Result<Vec<f64>> {
    let m = energies.len();
    let tol = 1e-12 * total.abs().max(1.0);
    for _ in 0..2 * m + 2 {
        let mut saturated = vec![false; m];
        for (e, &(lo, hi)) in energies.iter_mut().zip(limits) {
            if *e <= lo {
                *e = lo;
            } else if *e >= hi {
                *e = hi;
            }
        }
        let mismatch = total - energies.iter().sum::<f64>();
        if mismatch.abs() <= tol {
            return Ok(energies);
        }
        for (k, (e, &(lo, hi))) in energies.iter().zip(limits).enumerate() {
            let blocked = if mismatch > 0.0 { *e >= hi } else { *e <= lo };
            saturated[k] = blocked;
        }
        let free_sum: f64 = energies
            .iter()
            .zip(&saturated)
            .filter(|(_, s)| !**s)
            .map(|(e, _)| *e)
            .sum();
        let target = total
            - energies
                .iter()
                .zip(&saturated)
                .filter(|(_, s)| **s)
                .map(|(e, _)| *e)
                .sum::<f64>();
        if free_sum > tol && target > 0.0 {
            let scale = target / free_sum;
            for (e, s) in energies.iter_mut().zip(&saturated) {
                if !*s {
                    *e *= scale;
                }
            }
        } else {
            // Rescaling cannot move the sum; spread the residual over the
            // remaining slack instead.
            let slack: Vec<f64> = energies
                .iter()
                .zip(limits)
                .map(|(e, &(lo, hi))| if mismatch > 0.0 { hi - e } else { e - lo })
                .collect();
            let slack_sum: f64 = slack.iter().sum();
            if slack_sum <= tol {
                let (lo, hi) = limits
                    .iter()
                    .fold((0.0, 0.0), |acc, &(lo, hi)| (acc.0 + lo, acc.1 + hi));
                return Err(Error::InfeasibleAllocation {
                    budget: total,
                    min: lo,
                    max: hi,
                });
            }
            for (e, s) in energies.iter_mut().zip(&slack) {
                *e += mismatch * s / slack_sum;
            }
        }
    }
    let mismatch = total - energies.iter().sum::<f64>();
    if mismatch.abs() <= 1e-9 * total.abs().max(1.0) {
        Ok(energies)
    } else {
        let (lo, hi) = limits
            .iter()
            .fold((0.0, 0.0), |acc, &(lo, hi)| (acc.0 + lo, acc.1 + hi));
        Err(Error::InfeasibleAllocation {
            budget: total,
            min: lo,
            max: hi,
        })
    }
}

/// A feasible starting allocation: box midpoints scaled to the budget, then
/// projected into the admissible set.
pub fn initial_allocation(scenario: &Scenario, segmentation: &Segmentation) -> Result<Vec<f64>> {
    let limits = segment_energy_limits(segmentation, &scenario.fleet, scenario.ambient)?;
    let (lo_sum, hi_sum) = limits
        .iter()
        .fold((0.0, 0.0), |acc, &(lo, hi)| (acc.0 + lo, acc.1 + hi));
    if scenario.budget < lo_sum - 1e-9 || scenario.budget > hi_sum + 1e-9 {
        return Err(Error::InfeasibleAllocation {
            budget: scenario.budget,
            min: lo_sum,
            max: hi_sum,
        });
    }
    let midpoints: Vec<f64> = limits.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
    let mid_sum: f64 = midpoints.iter().sum();
    let scaled: Vec<f64> = if mid_sum > 1e-12 {
        let s = scenario.budget / mid_sum;
        midpoints.iter().map(|m| m * s).collect()
    } else {
        midpoints
    };
    project_allocation(scaled, &limits, scenario.budget)
}

/// Knobs of the allocation iteration.
#[derive(Debug, Clone, Copy)]
pub struct AllocationParams {
    /// Step parameter of the multiplier-balancing update.
    pub gamma: f64,
    /// Stopping tolerance on the multiplier spread; `None` scales the
    /// default to the mean price level.
    pub eps_pi: Option<f64>,
    pub max_iter: usize,
}

impl Default for AllocationParams {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            eps_pi: None,
            max_iter: 500,
        }
    }
}

/// Result of the allocation optimization.
#[derive(Debug, Clone)]
pub struct AllocationOutcome {
    pub allocation: Allocation,
    pub plans: Vec<RelaxedPlan>,
    pub total_cost: f64,
    pub trace: Vec<AllocationTraceRow>,
}

/// Iterate the multiplier-balancing update from a feasible allocation until
/// the spread of the chained marginal costs drops below the stopping
/// tolerance; equal marginals certify optimality of the convex allocation
/// problem. Energies leaving their boxes are clamped and the rest rescaled
/// so the sum stays on budget. A segment infeasibility during an iteration
/// halves the step back toward the previous feasible iterate. On iteration
/// exhaustion the best (smallest-spread) iterate is returned with
/// `converged = false`.
pub fn optimize_allocation(
    scenario: &Scenario,
    segmentation: &Segmentation,
    params: &AllocationParams,
) -> Result<AllocationOutcome> {
    let m = segmentation.len();
    let eps_pi = params
        .eps_pi
        .unwrap_or_else(|| 1e-3 * scenario.forecast().scan(256).mean.abs().max(1e-6));

    if m == 1 {
        let eval = evaluate_allocation(&[scenario.budget], scenario, segmentation)?;
        let row = AllocationTraceRow {
            energies: vec![scenario.budget],
            multipliers: eval.multipliers.clone(),
            total_cost: eval.total_cost,
            spread: 0.0,
        };
        return Ok(AllocationOutcome {
            allocation: Allocation {
                energies: vec![scenario.budget],
                multipliers: eval.multipliers.clone(),
                iterations: 0,
                converged: true,
            },
            plans: eval.plans,
            total_cost: eval.total_cost,
            trace: vec![row],
        });
    }

    let limits = segment_energy_limits(segmentation, &scenario.fleet, scenario.ambient)?;
    let mut energies = initial_allocation(scenario, segmentation)?;
    let e_hat = scenario.budget / m as f64;

    let mut trace = Vec::new();
    let mut last_feasible: Option<Vec<f64>> = None;
    let mut best: Option<(f64, Allocation, AllocationEvaluation)> = None;
    let mut iterations = 0usize;
    let mut repairs = 0usize;

    while iterations < params.max_iter {
        let eval = match evaluate_allocation(&energies, scenario, segmentation) {
            Ok(eval) => eval,
            Err(err @ (Error::InfeasibleEnergy { .. } | Error::InfeasibleAllocation { .. })) => {
                // The per-duration boxes ignore the realized entry state, so
                // an iterate can overrun what the chained segments admit.
                // Shrink toward the last feasible iterate.
                repairs += 1;
                if repairs > 60 {
                    return Err(err);
                }
                match &last_feasible {
                    Some(prev) => {
                        log::warn!("allocation iterate infeasible, halving step: {err}");
                        for (e, p) in energies.iter_mut().zip(prev) {
                            *e = 0.5 * (*e + p);
                        }
                        continue;
                    }
                    None => {
                        log::warn!("initial allocation infeasible, shrinking boxes: {err}");
                        energies = shrink_toward_midpoints(&energies, &limits, scenario.budget)?;
                        continue;
                    }
                }
            }
            Err(err) => return Err(err),
        };
        iterations += 1;
        last_feasible = Some(energies.clone());

        let marginals = allocation_marginals(&energies, scenario, segmentation, &eval);
        let spread = spread_of(&marginals);
        trace.push(AllocationTraceRow {
            energies: energies.clone(),
            multipliers: marginals.clone(),
            total_cost: eval.total_cost,
            spread,
        });

        let allocation = Allocation {
            energies: energies.clone(),
            multipliers: marginals.clone(),
            iterations,
            converged: spread < eps_pi,
        };
        let better = best.as_ref().map_or(true, |(s, _, _)| spread < *s);
        if better {
            best = Some((spread, allocation.clone(), eval.clone()));
        }
        if spread < eps_pi {
            let (_, allocation, eval) = best.unwrap();
            return Ok(AllocationOutcome {
                total_cost: eval.total_cost,
                plans: eval.plans,
                allocation,
                trace,
            });
        }

        let mean: f64 = marginals.iter().sum::<f64>() / m as f64;
        if mean.abs() < 1e-12 {
            return Err(Error::NotConverged {
                iterations,
                spread,
            });
        }
        let updated: Vec<f64> = energies
            .iter()
            .zip(&marginals)
            .map(|(e, pi)| e - params.gamma * (pi - mean) / mean * e_hat)
            .collect();
        energies = project_allocation(updated, &limits, scenario.budget)?;
    }

    let (spread, mut allocation, eval) = best.ok_or(Error::NotConverged {
        iterations,
        spread: f64::INFINITY,
    })?;
    allocation.converged = spread < eps_pi;
    allocation.iterations = iterations;
    Ok(AllocationOutcome {
        total_cost: eval.total_cost,
        plans: eval.plans,
        allocation,
        trace,
    })
}

fn spread_of(multipliers: &[f64]) -> f64 {
    let lo = multipliers.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = multipliers
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Pull an allocation halfway toward the box midpoints, keeping the sum.
fn shrink_toward_midpoints(
    energies: &[f64],
    limits: &[(f64, f64)],
    total: f64,
) -> Result<Vec<f64>> {
    let pulled: Vec<f64> = energies
        .iter()
        .zip(limits)
        .map(|(e, &(lo, hi))| 0.5 * (e + 0.5 * (lo + hi)))
        .collect();
    project_allocation(pulled, limits, total)
}

/// Stitch per-segment plans into one control per unit covering the horizon.
pub fn concat_controls(plans: &[RelaxedPlan]) -> Result<Vec<PiecewiseControl>> {
    if plans.is_empty() {
        return Err(Error::InvalidInput("no plans to concatenate".into()));
    }
    let n = plans[0].controls.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut breakpoints = vec![plans[0].controls[i].start()];
        let mut values: Vec<f64> = Vec::new();
        for plan in plans {
            let control = &plan.controls[i];
            for (a, b, v) in control.pieces() {
                let _ = a;
                if values.last().map_or(false, |last| (last - v).abs() <= 1e-12) {
                    *breakpoints.last_mut().unwrap() = b;
                } else {
                    values.push(v);
                    breakpoints.push(b);
                }
            }
        }
        out.push(PiecewiseControl::new(breakpoints, values)?);
    }
    Ok(out)
}

/// Total energy range implied by the per-segment boxes.
pub fn global_energy_limits(limits: &[(f64, f64)]) -> (f64, f64) {
    limits
        .iter()
        .fold((0.0, 0.0), |acc, &(lo, hi)| (acc.0 + lo, acc.1 + hi))
}
