//! Planner benchmarks on the two reference scenarios.

use criterion::{criterion_group, criterion_main, Criterion};

use tcl_core::segment::AllocationParams;
use tcl_core::{
    optimize_allocation, segment_price, solve_grid, solve_increasing, synthesize_plans, testdata,
    Direction, SegmentProblem,
};

fn single_segment_solve(c: &mut Criterion) {
    let s = testdata::example1();
    let problem = SegmentProblem::new(
        s.fleet.clone(),
        s.forecast(),
        0.0,
        24.0,
        Direction::Increasing,
        s.ambient,
        s.budget,
        s.fleet.initial_temps(),
    )
    .unwrap();
    c.bench_function("solve_increasing_reference", |b| {
        b.iter(|| solve_increasing(&problem).unwrap())
    });
}

fn allocation(c: &mut Criterion) {
    let s = testdata::example2();
    let seg = segment_price(&s.forecast());
    let params = AllocationParams::default();
    c.bench_function("optimize_allocation_reference", |b| {
        b.iter(|| optimize_allocation(&s, &seg, &params).unwrap())
    });
}

fn synthesis(c: &mut Criterion) {
    let s = testdata::example2();
    let seg = segment_price(&s.forecast());
    let out = optimize_allocation(&s, &seg, &AllocationParams::default()).unwrap();
    c.bench_function("synthesize_reference", |b| {
        b.iter(|| synthesize_plans(&out.plans, &s).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let s = testdata::example1();
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    group.bench_function("grid_solve_dt_0.05", |b| {
        b.iter(|| solve_grid(&s, 0.05, 1e-9).unwrap())
    });
    group.finish();
}

criterion_group!(benches, single_segment_solve, allocation, synthesis, oracle);
criterion_main!(benches);
