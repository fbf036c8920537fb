use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use mmo_core::classify::{analyse, Frame, Thresholds};
use mmo_core::geometry::{geometry_report, m2_fold_points};
use mmo_core::integrate::{default_initial_state, integrate, transient_strip, IntegratorConfig, Strip};
use mmo_core::local::{entry_exit, numeric_x_dh};
use mmo_core::{g_drift, koper_to_normal_form, KoperParams, NormalFormParams, Side, System};

fn koper(k: f64, lambda: f64) -> NormalFormParams {
    koper_to_normal_form(&KoperParams::new(k, lambda, 0.01, 0.01)).unwrap()
}

fn geometry(c: &mut Criterion) {
    let p = koper(-4.5, 1.5);
    c.bench_function("m2_fold_points", |b| b.iter(|| m2_fold_points(black_box(&p)).unwrap()));
    c.bench_function("geometry_report", |b| {
        b.iter(|| geometry_report(black_box(&p)).unwrap())
    });
}

fn local(c: &mut Criterion) {
    let p = koper(-4.4, 1.5);
    let x_in = numeric_x_dh(&p).unwrap() - 0.3;
    c.bench_function("entry_exit", |b| {
        b.iter(|| entry_exit(&p, black_box(x_in), Side::Minus).unwrap())
    });
    let q = koper(-4.5, 1.5);
    c.bench_function("g_drift", |b| {
        b.iter(|| g_drift(&q, black_box(-0.6), 0.0, 0.0).unwrap())
    });
}

fn simulate(c: &mut Criterion) {
    let sys = System::Koper(KoperParams::new(-4.5, 1.5, 0.01, 0.01));
    let cfg = IntegratorConfig::default();
    let s0 = default_initial_state(&sys);
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    g.bench_function("integrate_500", |b| {
        b.iter(|| integrate(&sys, s0, (0.0, 500.0), &cfg).unwrap())
    });
    let traj = integrate(&sys, s0, (0.0, 5000.0), &cfg).unwrap();
    let tail = transient_strip(&traj, Strip::default()).unwrap();
    let frame = Frame::for_system(&sys).unwrap();
    let th = Thresholds::default();
    g.bench_function("analyse", |b| b.iter(|| analyse(&tail, &frame, &th, Some(&sys))));
    g.finish();
}

criterion_group!(benches, geometry, local, simulate);
criterion_main!(benches);
