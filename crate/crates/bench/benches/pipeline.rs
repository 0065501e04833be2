use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use causumx_bench::synthetic;
use causumx_core::lpsolve::{build_ilp, greedy_select, randomized_rounding, solve_lp_relaxation};
use causumx_core::tabular::evaluate_query;
use causumx_core::{explain, mine_grouping_patterns, Algorithm, Settings};

fn end_to_end(c: &mut Criterion) {
    let mut g = c.benchmark_group("explain");
    g.sample_size(10);
    for n in [5_000, 20_000] {
        let w = synthetic(n, 3, 3);
        g.bench_with_input(BenchmarkId::new("causumx", n), &w, |b, w| {
            b.iter(|| explain(&w.data, &w.dag, &w.query, &w.settings).unwrap())
        });
        let greedy = Settings {
            algorithm: Algorithm::Greedy,
            ..w.settings.clone()
        };
        g.bench_with_input(BenchmarkId::new("greedy", n), &w, |b, w| {
            b.iter(|| explain(&w.data, &w.dag, &w.query, &greedy).unwrap())
        });
    }
    g.finish();
}

fn grouping(c: &mut Criterion) {
    let w = synthetic(50_000, 5, 1);
    let view = evaluate_query(&w.data, &w.query).unwrap();
    let attrs = w.settings.grouping_attrs.clone().unwrap();
    c.bench_function("mine_grouping_patterns/50000x5", |b| {
        b.iter(|| mine_grouping_patterns(&w.data, &view, black_box(&attrs), 0.1).unwrap())
    });
}

fn selection(c: &mut Criterion) {
    let w = synthetic(5_000, 4, 3);
    let report = explain(&w.data, &w.dag, &w.query, &w.settings).unwrap();
    let ilp = build_ilp(&report.candidates, report.view.m(), 5, 0.75).unwrap();
    c.bench_function("lp_relaxation", |b| b.iter(|| solve_lp_relaxation(black_box(&ilp)).unwrap()));
    if let Some(frac) = solve_lp_relaxation(&ilp).unwrap() {
        c.bench_function("randomized_rounding", |b| b.iter(|| randomized_rounding(black_box(&frac), 5, 7)));
    }
    c.bench_function("greedy_select", |b| b.iter(|| greedy_select(black_box(&ilp))));
}

criterion_group!(benches, end_to_end, grouping, selection);
criterion_main!(benches);
