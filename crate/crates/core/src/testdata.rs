//! Reference scenarios and a deterministic scenario sampler shared by
//! tests, benches, and the bundled scenario files.

use crate::model::{AcUnit, Fleet, PriceCurve, Scenario};
use crate::monotone::{
    self, solve_segment, Direction, RelaxedPlan, SegmentProblem,
};

fn two_unit_fleet() -> Fleet {
    let base = AcUnit {
        alpha: 0.1,
        beta: 2.0,
        lower: 18.0,
        upper: 22.0,
        x0: 19.0,
    };
    Fleet {
        units: vec![base, AcUnit { x0: 21.0, ..base }],
        power: 1.0,
    }
}

/// Two identical units, affine increasing price `1 + t`, 24 h horizon,
/// budget of half the maximum duty.
pub fn example1() -> Scenario {
    Scenario {
        fleet: two_unit_fleet(),
        price: PriceCurve::Affine { a: 1.0, b: 1.0 },
        ambient: 30.0,
        budget: 24.0,
        horizon: 24.0,
        t_min_switch: 1.0 / 60.0,
    }
}

/// Same fleet with the non-monotone price `5 - sin(2 pi t / 24)`.
pub fn example2() -> Scenario {
    Scenario {
        price: PriceCurve::Sinusoid {
            c: 5.0,
            a: -1.0,
            omega: std::f64::consts::PI / 12.0,
            phi: 0.0,
        },
        ..example1()
    }
}

/// Small deterministic generator (splitmix64) so randomized suites need no
/// external dependency and reproduce exactly.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let x = self.next_u64() as f64 / u64::MAX as f64;
        lo + (hi - lo) * x
    }

    pub fn index(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// A sampled homogeneous monotone-price instance together with its segment
/// problem and solved plan.
pub struct MonotoneSample {
    pub scenario: Scenario,
    pub problem: SegmentProblem,
    pub plan: RelaxedPlan,
}

/// Price families the sampler can draw from. Optimality-grade suites use
/// the differentiable family only: piecewise-linear kinks make the exact
/// optimum multi-burst, which the single-switch closed form does not
/// represent, so such draws are exercised for feasibility rather than
/// stationarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceFamily {
    /// Affine prices only: the family on which the single-switch form is
    /// exactly stationary for every admissible budget.
    Affine,
    /// Affine and monotone sinusoid pieces. Sinusoid stretches leaving an
    /// extremum accelerate faster than the thermal rate, where the true
    /// optimum adds a second burst; gaps stay within the grid-compare
    /// tolerance model.
    Smooth,
    /// Smooth plus piecewise-linear ramps.
    Mixed,
}

/// Draw a random admissible homogeneous scenario with a monotone price and
/// solve it. Loss rates lie in [0.05, 0.3], gain ratios in [10, 30], bands
/// within (ambient - 12, ambient - 2), initial temperatures uniform in the
/// band, and the budget uniform in the feasible range.
///
/// Samples are restricted to the regimes the synchronized closed form
/// covers: either every unit ends inside the band, or every unit reaches
/// the active boundary before the common switch so the boundary entries
/// share one anchor. Budgets forcing mixed endings with per-unit anchors
/// are redrawn; the four-phase construction stays feasible there but its
/// common switch time is no longer exactly stationary.
pub fn sample_monotone(
    rng: &mut TestRng,
    direction: Direction,
    family: PriceFamily,
) -> MonotoneSample {
    let ambient = 30.0;
    for _ in 0..500 {
        let alpha = rng.uniform(0.05, 0.3);
        let ratio = rng.uniform(10.0, 30.0);
        let lower = rng.uniform(ambient - 12.0, ambient - 4.0);
        let upper = rng.uniform(lower + 0.8, (ambient - 2.0).min(lower + 8.0));
        // Keep both sliding levels strictly inside (0, 1).
        if (ambient - lower) / ratio > 0.97 || (ambient - upper) / ratio < 0.03 {
            continue;
        }
        let n_units = 1 + rng.index(4);
        let units: Vec<AcUnit> = (0..n_units)
            .map(|_| AcUnit {
                alpha,
                beta: alpha * ratio,
                lower,
                upper,
                x0: rng.uniform(lower, upper),
            })
            .collect();
        let fleet = Fleet {
            units,
            power: 1.0,
        };
        let horizon = rng.uniform(6.0, 24.0);
        let pick = match family {
            PriceFamily::Affine => 0,
            PriceFamily::Smooth => rng.index(2),
            PriceFamily::Mixed => rng.index(3),
        };
        let increasing = direction == Direction::Increasing;
        let price = match pick {
            0 => PriceCurve::Affine {
                a: if increasing {
                    rng.uniform(0.5, 5.0)
                } else {
                    rng.uniform(10.0, 40.0)
                },
                b: if increasing {
                    rng.uniform(0.05, 2.0)
                } else {
                    -rng.uniform(0.05, 2.0)
                },
            },
            1 => {
                // One monotone stretch of a sinusoid covering the horizon.
                let amplitude = rng.uniform(0.5, 3.0);
                let omega = rng.uniform(0.3, 1.0) * std::f64::consts::PI / horizon;
                let phi = if increasing {
                    -std::f64::consts::FRAC_PI_2
                } else {
                    std::f64::consts::FRAC_PI_2
                };
                PriceCurve::Sinusoid {
                    c: amplitude + rng.uniform(0.5, 4.0),
                    a: amplitude,
                    omega,
                    phi,
                }
            }
            _ => ramp_samples(rng, horizon, increasing),
        };
        let temps = fleet.initial_temps();
        let Ok((lo, hi)) = monotone::energy_range_from(&fleet, ambient, &temps, horizon) else {
            continue;
        };
        if hi - lo < 1e-3 {
            continue;
        }
        let margin = 1e-4 * (hi - lo);
        let budget = rng.uniform(lo + margin, hi - margin);
        let scenario = Scenario {
            fleet: fleet.clone(),
            price,
            ambient,
            budget,
            horizon,
            t_min_switch: 1.0 / 60.0,
        };
        let Ok(problem) = SegmentProblem::new(
            fleet,
            scenario.forecast(),
            0.0,
            horizon,
            direction,
            ambient,
            budget,
            temps,
        ) else {
            continue;
        };
        let Ok(plan) = solve_segment(&problem) else {
            continue;
        };
        if !synchronized_regime(&problem, &plan) {
            continue;
        }
        return MonotoneSample {
            scenario,
            problem,
            plan,
        };
    }
    panic!("scenario sampler failed to find an admissible draw");
}

fn ramp_samples(rng: &mut TestRng, horizon: f64, increasing: bool) -> PriceCurve {
    let n = 4 + rng.index(5);
    let mut level = rng.uniform(1.0, 4.0);
    let mut points = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = horizon * k as f64 / n as f64;
        points.push((t, level));
        let step = rng.uniform(0.2, 2.0);
        level += if increasing { step } else { -step };
    }
    if !increasing {
        // Keep prices positive.
        let min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        if min < 0.5 {
            for p in &mut points {
                p.1 += 0.5 - min;
            }
        }
    }
    PriceCurve::Sampled { points }
}

fn synchronized_regime(problem: &SegmentProblem, plan: &RelaxedPlan) -> bool {
    let unit = &problem.fleet.units[0];
    let horizon_end = problem.end;
    match problem.direction {
        Direction::Increasing => {
            let drift = monotone::drift_time_l_to_u(unit, problem.ambient);
            let all_interior = plan
                .entry_times_upper
                .iter()
                .all(|&e| e >= horizon_end + 1e-6);
            let max_entry_lower = plan
                .entry_times_lower
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let synchronized = plan.t_star >= max_entry_lower - 1e-9
                && horizon_end - plan.t_star >= drift - 1e-6;
            all_interior || synchronized
        }
        Direction::Decreasing => {
            let drain = match monotone::drain_time_u_to_l(unit, problem.ambient) {
                Ok(d) => d,
                Err(_) => return false,
            };
            let all_interior = plan
                .entry_times_lower
                .iter()
                .all(|&e| e >= horizon_end + 1e-6);
            let max_entry_upper = plan
                .entry_times_upper
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let synchronized = plan.t_star >= max_entry_upper - 1e-9
                && horizon_end - plan.t_star >= drain - 1e-6;
            all_interior || synchronized
        }
    }
}
