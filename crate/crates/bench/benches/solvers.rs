use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mg1_core::deviation::DeviationWindow;
use mg1_core::mapg1::{embed_chain, loss_exact, EmbedOptions, MapSpec, ServiceDist};
use mg1_core::matan::MatanSolution;
use mg1_core::oracle::gth;
use mg1_core::stationary::{solve_finite, solve_infinite, StationaryOptions};
use mg1_core::{presets, FiniteChainSpec};

fn g_matrix(c: &mut Criterion) {
    let mut group = c.benchmark_group("g_matrix");
    for (name, spec) in [
        ("mm1", presets::mm1()),
        ("mp2", presets::mp2()),
        ("hc1", presets::hc1_default()),
    ] {
        group.bench_function(name, |b| {
            b.iter(|| MatanSolution::solve(black_box(&spec)).unwrap())
        });
    }
    group.finish();
}

fn stationary(c: &mut Criterion) {
    let mut group = c.benchmark_group("stationary_infinite");
    for (name, spec) in [("mp2", presets::mp2()), ("hc1", presets::hc1_default())] {
        let sol = MatanSolution::solve(&spec).unwrap();
        let opts = StationaryOptions::for_spec(&spec);
        group.bench_function(name, |b| {
            b.iter(|| solve_infinite(&spec, &sol, &opts).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("stationary_finite");
    let spec = presets::mp2();
    for n in [50, 200, 400] {
        let f = FiniteChainSpec::last_column(&spec, n).unwrap();
        group.bench_with_input(BenchmarkId::new("block_gth", n), &f, |b, f| {
            b.iter(|| solve_finite(f).unwrap())
        });
        let p = f.assemble();
        group.bench_with_input(BenchmarkId::new("dense_gth", n), &p, |b, p| {
            b.iter(|| gth(p).unwrap())
        });
    }
    group.finish();
}

fn deviation(c: &mut Criterion) {
    let spec = presets::mp2();
    let sol = MatanSolution::solve(&spec).unwrap();
    let pi = solve_infinite(&spec, &sol, &StationaryOptions::for_spec(&spec)).unwrap();
    c.bench_function("deviation_window_mp2_20x5", |b| {
        b.iter(|| DeviationWindow::build(&spec, &sol, &pi, 20, 5).unwrap())
    });
}

fn loss(c: &mut Criterion) {
    let map = presets::mp2_map();
    let svc = ServiceDist::Exponential { rate: 4.0 };
    c.bench_function("embed_mp2", |b| {
        b.iter(|| embed_chain(&map, &svc, &EmbedOptions::default()).unwrap())
    });
    let pareto = ServiceDist::pareto_unit_mean(3.5);
    let poisson = MapSpec::poisson(0.5).unwrap();
    let opts = EmbedOptions {
        k_max: 256,
        ..EmbedOptions::default()
    };
    c.bench_function("embed_pareto", |b| {
        b.iter(|| embed_chain(&poisson, &pareto, &opts).unwrap())
    });
    let model = presets::mp2_model().unwrap();
    c.bench_function("loss_mp2_n100", |b| {
        b.iter(|| loss_exact(&model, black_box(100)).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = g_matrix, stationary, deviation, loss
}
criterion_main!(benches);
