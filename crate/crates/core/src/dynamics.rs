//! Closed-form thermal dynamics under piecewise-constant controls, with
//! exact energy and cost accounting.
//!
//! The per-unit dynamics are linear time-invariant on every control piece,
//! so all propagation uses the exponential closed form. There is no ODE
//! integrator anywhere and no integration tolerance to tune.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AcUnit, PriceForecast, Scenario};

/// Default sampling step (hours) for trajectory export. Computation is
/// exact regardless of the grid; this only affects CSV resolution.
pub const EXPORT_GRID_DT: f64 = 0.01;

/// Exact state after holding control `u` for `dt` hours from state `x`:
/// the solution of `x' = -alpha (x - ambient) - beta u`.
pub fn step(x: f64, u: f64, dt: f64, unit: &AcUnit, ambient: f64) -> f64 {
    let target = ambient - unit.beta / unit.alpha * u;
    target + (x - target) * (-unit.alpha * dt).exp()
}

/// A piecewise-constant control: `values[k]` applies on
/// `[breakpoints[k], breakpoints[k+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseControl {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseControl {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} breakpoints do not delimit {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(-1e-12..=1.0 + 1e-12).contains(v)) {
            return Err(Error::InvalidInput(
                "control values must lie in [0, 1]".into(),
            ));
        }
        let values = values.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(Self {
            breakpoints,
            values,
        })
    }

    /// A single constant level over `[start, end]`.
    pub fn constant(start: f64, end: f64, level: f64) -> Result<Self> {
        Self::new(vec![start, end], vec![level])
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Control level at time `t` (right-continuous; the final instant takes
    /// the last level).
    pub fn value_at(&self, t: f64) -> f64 {
        if t <= self.start() {
            return self.values[0];
        }
        if t >= self.end() {
            return *self.values.last().unwrap();
        }
        let idx = self.breakpoints.partition_point(|b| *b <= t);
        self.values[idx - 1]
    }

    /// Exact integral of the control over its span (unit-hours).
    pub fn energy(&self) -> f64 {
        self.values
            .iter()
            .zip(self.breakpoints.windows(2))
            .map(|(v, w)| v * (w[1] - w[0]))
            .sum()
    }

    /// Pieces as `(start, end, level)` triples.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| (w[0], w[1], *v))
    }

    /// Exact state at the end of the span starting from `x` at the span
    /// start, stepping through each piece.
    pub fn propagate(&self, x: f64, unit: &AcUnit, ambient: f64) -> f64 {
        self.pieces()
            .fold(x, |x, (a, b, v)| step(x, v, b - a, unit, ambient))
    }
}

/// Sampled state of the whole fleet under a set of controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    /// Sample times covering the horizon, including every control breakpoint.
    pub times: Vec<f64>,
    /// Per-unit temperature series, unit-major: `temps[i][k]`.
    pub temps: Vec<Vec<f64>>,
    /// Per-unit control series sampled at `times` (right-continuous).
    pub controls: Vec<Vec<f64>>,
    /// Aggregate consumed energy up to each sample time (unit-hours).
    pub cum_energy: Vec<f64>,
}

impl Trajectory {
    pub fn final_temps(&self) -> Vec<f64> {
        self.temps.iter().map(|t| *t.last().unwrap()).collect()
    }

    pub fn total_energy(&self) -> f64 {
        *self.cum_energy.last().unwrap()
    }

    pub fn temp_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for series in &self.temps {
            for &x in series {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        (lo, hi)
    }

    /// CSV export with columns `t, x_1..x_N, cum_energy, u_1..u_N`, one row
    /// per sample, fixed 6-decimal formatting.
    pub fn to_csv(&self) -> String {
        let n = self.temps.len();
        let mut out = String::new();
        out.push('t');
        for i in 1..=n {
            let _ = write!(out, ",x_{i}");
        }
        out.push_str(",cum_energy");
        for i in 1..=n {
            let _ = write!(out, ",u_{i}");
        }
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{t:.6}");
            for series in &self.temps {
                let _ = write!(out, ",{:.6}", series[k]);
            }
            let _ = write!(out, ",{:.6}", self.cum_energy[k]);
            for series in &self.controls {
                let _ = write!(out, ",{:.6}", series[k]);
            }
            out.push('\n');
        }
        out
    }
}

fn check_coverage(control: &PiecewiseControl, horizon: f64) -> Result<()> {
    if control.start().abs() > 1e-9 || (control.end() - horizon).abs() > 1e-9 {
        return Err(Error::ControlCoverage {
            start: control.start(),
            end: control.end(),
            horizon,
        });
    }
    Ok(())
}

/// Exact simulation of the fleet under per-unit controls.
///
/// Samples lie on the union of the regular `grid_dt` grid and every control
/// breakpoint; the temperature at each sample is exact closed-form
/// propagation, and the cumulative energy is an exact finite sum.
pub fn simulate(
    controls: &[PiecewiseControl],
    scenario: &Scenario,
    grid_dt: f64,
) -> Result<Trajectory> {
    if controls.len() != scenario.fleet.len() {
        return Err(Error::InvalidInput(format!(
            "{} controls for {} units",
            controls.len(),
            scenario.fleet.len()
        )));
    }
    if !(grid_dt > 0.0) {
        return Err(Error::InvalidInput("grid step must be positive".into()));
    }
    let horizon = scenario.horizon;
    for control in controls {
        check_coverage(control, horizon)?;
    }

    // Merge the regular grid with every breakpoint.
    let mut times: Vec<f64> = Vec::new();
    let steps = (horizon / grid_dt).ceil() as usize;
    for k in 0..=steps {
        times.push((k as f64 * grid_dt).min(horizon));
    }
    for control in controls {
        times.extend_from_slice(&control.breakpoints);
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);

    let mut temps = Vec::with_capacity(controls.len());
    let mut sampled_controls = Vec::with_capacity(controls.len());
    for (unit, control) in scenario.fleet.units.iter().zip(controls) {
        let mut series = Vec::with_capacity(times.len());
        let mut x = unit.x0;
        let mut prev_t = 0.0;
        for &t in &times {
            // Every piece boundary is a sample, so [prev_t, t] has one level.
            let level = control.value_at(0.5 * (prev_t + t));
            x = step(x, level, t - prev_t, unit, scenario.ambient);
            series.push(x);
            prev_t = t;
        }
        sampled_controls.push(times.iter().map(|&t| control.value_at(t)).collect());
        temps.push(series);
    }

    let mut cum_energy = Vec::with_capacity(times.len());
    let mut prev_t = 0.0;
    let mut total = 0.0;
    for &t in &times {
        for control in controls {
            total += control.value_at(0.5 * (prev_t + t)) * (t - prev_t);
        }
        cum_energy.push(total);
        prev_t = t;
    }

    Ok(Trajectory {
        times,
        temps,
        controls: sampled_controls,
        cum_energy,
    })
}

/// Exact procurement cost of the controls under the price forecast:
/// the integral of price times aggregate control, evaluated in closed form
/// piece by piece.
pub fn cost(controls: &[PiecewiseControl], price: &PriceForecast) -> f64 {
    controls
        .iter()
        .flat_map(|c| c.pieces())
        .map(|(a, b, v)| v * price.integral(a, b))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PriceCurve;
    use crate::testdata;
    use proptest::prelude::*;

    fn unit() -> AcUnit {
        AcUnit {
            alpha: 0.1,
            beta: 2.0,
            lower: 18.0,
            upper: 22.0,
            x0: 19.0,
        }
    }

    #[test]
    fn step_fixes_ambient_equilibrium() {
        let u = unit();
        for dt in [0.0, 0.5, 3.0, 100.0] {
            assert!((step(30.0, 0.0, dt, &u, 30.0) - 30.0).abs() < 1e-12);
        }
    }

    #[test]
    fn step_reaches_lower_bound_at_reference_time() {
        let u = unit();
        let x = step(19.0, 1.0, 1.1778, &u, 30.0);
        assert!((x - 18.0).abs() < 1e-3, "x = {x}");
    }

    #[test]
    fn step_coasts_to_upper_bound_at_reference_time() {
        let u = unit();
        let x = step(18.0, 0.0, 4.0547, &u, 30.0);
        assert!((x - 22.0).abs() < 1e-3, "x = {x}");
    }

    proptest! {
        #[test]
        fn step_composes(x in 10.0..35.0f64, u in 0.0..1.0f64,
                         a in 0.0..10.0f64, b in 0.0..10.0f64) {
            let un = unit();
            let two = step(step(x, u, a, &un, 30.0), u, b, &un, 30.0);
            let one = step(x, u, a + b, &un, 30.0);
            prop_assert!((two - one).abs() < 1e-12);
        }

        #[test]
        fn cost_is_linear_in_controls(scale in 0.0..1.0f64, level in 0.0..1.0f64) {
            let price = PriceForecast::new(PriceCurve::Affine { a: 1.0, b: 0.5 }, 10.0);
            let full = PiecewiseControl::new(vec![0.0, 4.0, 10.0], vec![level, level * 0.5]).unwrap();
            let scaled = PiecewiseControl::new(
                vec![0.0, 4.0, 10.0],
                vec![level * scale, level * 0.5 * scale],
            ).unwrap();
            let c1 = cost(std::slice::from_ref(&full), &price);
            let c2 = cost(std::slice::from_ref(&scaled), &price);
            prop_assert!((c2 - scale * c1).abs() < 1e-9 * (1.0 + c1.abs()));
        }
    }

    #[test]
    fn simulate_zero_controls_from_equilibrium() {
        let mut scenario = testdata::example1();
        for u in &mut scenario.fleet.units {
            u.x0 = 22.0;
        }
        scenario.ambient = 22.0 + 1e-9; // effectively at equilibrium
        let zero = PiecewiseControl::constant(0.0, 24.0, 0.0).unwrap();
        let traj = simulate(&[zero.clone(), zero], &scenario, 0.5).unwrap();
        let (lo, hi) = traj.temp_bounds();
        assert!(hi - lo < 1e-8);
        assert!(traj.total_energy().abs() < 1e-12);
        assert!(traj.cum_energy.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn cost_of_zero_controls_is_zero() {
        let price = PriceForecast::new(PriceCurve::Affine { a: 1.0, b: 1.0 }, 24.0);
        let zero = PiecewiseControl::constant(0.0, 24.0, 0.0).unwrap();
        assert_eq!(cost(&[zero], &price), 0.0);
    }

    #[test]
    fn simulate_rejects_short_controls() {
        let scenario = testdata::example1();
        let short = PiecewiseControl::constant(0.0, 20.0, 0.5).unwrap();
        let full = PiecewiseControl::constant(0.0, 24.0, 0.5).unwrap();
        assert!(matches!(
            simulate(&[short, full], &scenario, 0.5),
            Err(Error::ControlCoverage { .. })
        ));
    }

    #[test]
    fn csv_has_expected_shape() {
        let scenario = testdata::example1();
        let c = PiecewiseControl::constant(0.0, 24.0, 0.5).unwrap();
        let traj = simulate(&[c.clone(), c], &scenario, 6.0).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x_1,x_2,cum_energy,u_1,u_2");
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 6);
        assert!(first.starts_with("0.000000,"));
    }
}
