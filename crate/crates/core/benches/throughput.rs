//! Parallel vs single-threaded throughput of the heavy stages.
//!
//! `parallel` uses the global rayon pool; `sequential` runs the same call
//! inside a one-thread pool. Built without the `parallel` feature both
//! variants are sequential.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use antijam::allocator::{iterative_allocate, surrogate_covariance, AllocatorOptions};
use antijam::channel::{generate_scenario_geometry, ChannelSet};
use antijam::config::{Preset, ScenarioConfig};
use antijam::exec;
use antijam::grid::build_resource_partition;
use antijam::harness::{run_sweep, Baseline, JammerKind, SweepAxis, SweepSpec};
use antijam::jammer::worst_case_strategy;

fn setup(cfg: &ScenarioConfig) -> (ChannelSet, antijam::grid::ResourcePartition, Vec<antijam::linalg::CMat>) {
    let sys = &cfg.system;
    let geo = generate_scenario_geometry(sys, &cfg.geometry);
    let channels = ChannelSet::synthesize(&geo, sys);
    let partition = build_resource_partition(sys).unwrap();
    let s = surrogate_covariance(&channels.jammer_doas, sys.eta, sys.noise_mw, sys.rx_antennas);
    let design = vec![s.matrix; channels.dims.len()];
    (channels, partition, design)
}

type Runner<R> = Box<dyn Fn() -> R + Send + Sync>;

fn modes<R: Send + 'static>(f: impl Fn() -> R + Send + Sync + 'static) -> [(&'static str, Runner<R>); 2] {
    let f = std::sync::Arc::new(f);
    let g = f.clone();
    [("parallel", Box::new(move || f())), ("sequential", Box::new(move || exec::sequential(|| g())))]
}

fn allocator(c: &mut Criterion) {
    let cfg = Preset::Desk.config();
    let (channels, partition, design) = setup(&cfg);
    let power = cfg.system.user_power_mw;
    let mut group = c.benchmark_group("allocator");
    group.sample_size(10);
    for (name, run) in modes(move || {
        iterative_allocate(&channels, &design, &partition, power, &AllocatorOptions::default()).unwrap()
    }) {
        group.bench_function(BenchmarkId::new("desk", name), |b| b.iter(|| black_box(run())));
    }
    group.finish();
}

fn jammer(c: &mut Criterion) {
    let cfg = Preset::Desk.config();
    let (channels, partition, design) = setup(&cfg);
    let alloc = iterative_allocate(&channels, &design, &partition, cfg.system.user_power_mw, &AllocatorOptions::default())
        .unwrap()
        .allocation;
    let budget = cfg.system.jammer_power_mw;
    let mut group = c.benchmark_group("worst_case_jammer");
    group.sample_size(10);
    for (name, run) in modes(move || worst_case_strategy(&channels, &alloc, budget).unwrap()) {
        group.bench_function(BenchmarkId::new("desk", name), |b| b.iter(|| black_box(run())));
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let mut cfg = Preset::Desk.config();
    cfg.system.subcarriers = 8;
    let mut spec = SweepSpec::new(SweepAxis::JammerAntennas, vec![16.0, 64.0], 2);
    spec.curves = vec![(Baseline::SensingAssisted, JammerKind::WorstCase), (Baseline::NoProtection, JammerKind::Barrage)];
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, run) in modes(move || run_sweep(&spec, &cfg).unwrap()) {
        group.bench_function(BenchmarkId::new("8 runs", name), |b| b.iter(|| black_box(run())));
    }
    group.finish();
}

criterion_group!(benches, allocator, jammer, sweep);
criterion_main!(benches);
