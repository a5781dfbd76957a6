use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stablenode::ad::Graph;
use stablenode::dataset::make_windows;
use stablenode::metrics::{discrete_frechet, dtw};
use stablenode::odeint::{integrate, Method, Record, SolverConfig};
use stablenode::trainer::{batch_gradients, TrainConfig};
use stablenode_bench::{grid_points, hook, shape_model};

fn field(c: &mut Criterion) {
    let mut group = c.benchmark_group("f_hat");
    let model = shape_model(16);
    for n in [1, 25, 120] {
        let x = grid_points(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            let bm = model.frozen().unwrap();
            b.iter(|| bm.f_hat_detached(black_box(x)).unwrap())
        });
    }
    group.finish();
}

fn rollouts(c: &mut Criterion) {
    let mut group = c.benchmark_group("rollout");
    let model = shape_model(16);
    let x0 = grid_points(25);
    let times: Vec<f64> = (1..=20).map(|i| 0.1 * i as f64).collect();
    for (name, cfg) in [
        ("rk4", SolverConfig::fixed(Method::Rk4, 0.02)),
        ("dopri5", SolverConfig::dopri5(1e-4, 1e-5)),
    ] {
        group.bench_function(name, |b| {
            let bm = model.frozen().unwrap();
            b.iter(|| integrate(&bm, black_box(&x0), 0.0, &times, &cfg, Record::Off).unwrap())
        });
    }
    group.bench_function("dopri5_taped_backward", |b| {
        let cfg = SolverConfig::dopri5(1e-4, 1e-5);
        b.iter(|| {
            let g = Graph::new();
            let bm = model.bind(&g).unwrap();
            let sol = integrate(&bm, &x0, 0.0, &times, &cfg, Record::Tape).unwrap();
            let loss = sol.states.last().unwrap().square().unwrap().sum().unwrap();
            g.backward(&loss).unwrap()
        })
    });
    group.finish();
}

fn training_step(c: &mut Criterion) {
    let demos = hook();
    let model = shape_model(16);
    let mut cfg = TrainConfig::default();
    cfg.solver = SolverConfig::dopri5(1e-4, 1e-5);
    let batch = make_windows(&demos, cfg.window, cfg.batch, 0).unwrap();
    c.bench_function("batch_gradients", |b| b.iter(|| batch_gradients(&model, black_box(&batch), &cfg).unwrap()));
}

fn metrics(c: &mut Criterion) {
    let demos = hook();
    let p = &demos.demos[0].trajectory.points;
    let q = &demos.demos[1].trajectory.points;
    c.bench_function("dtw_200x200", |b| b.iter(|| dtw(black_box(p), black_box(q)).unwrap()));
    c.bench_function("frechet_200x200", |b| b.iter(|| discrete_frechet(black_box(p), black_box(q)).unwrap()));
}

criterion_group!(benches, field, rollouts, training_step, metrics);
criterion_main!(benches);
