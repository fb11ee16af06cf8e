use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use netweave_bench::fixture;
use netweave_core::anchored::{build_chi_problem, run_sdp, SdpOptions};
use netweave_core::topology::candidate_levels;
use netweave_core::{
    brute_force_power, iotntop, lmst_topology, localize, IoTNTopOptions, Layout, LocalizeOptions, PowerConfig,
};

fn localization(c: &mut Criterion) {
    let mut group = c.benchmark_group("localize");
    group.sample_size(10);
    for n in [20, 50, 100] {
        let (net, meas) = fixture(n, 6, 0.1, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| localize(black_box(&net), black_box(&meas), &LocalizeOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn anchoring(c: &mut Criterion) {
    let (net, meas) = fixture(50, 6, 0.0, 2);
    let problem = build_chi_problem(&net, &meas).unwrap();
    c.bench_function("sdp_50_nodes_100_sweeps", |b| {
        b.iter(|| {
            run_sdp(
                black_box(&problem),
                SdpOptions {
                    max_sweeps: 100,
                    tol: 0.0,
                },
            )
            .unwrap()
        })
    });
}

fn topology(c: &mut Criterion) {
    let cfg = PowerConfig::default();
    let opts = IoTNTopOptions::default();
    let mut group = c.benchmark_group("topology");
    for n in [20, 100] {
        let (net, _) = fixture(n, 6, 0.0, 3);
        let layout = Layout::from_network(&net);
        group.bench_with_input(BenchmarkId::new("iotntop", n), &n, |b, _| {
            b.iter(|| iotntop(black_box(&layout), &cfg, &opts).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("lmst", n), &n, |b, _| {
            b.iter(|| lmst_topology(black_box(&layout), &cfg).unwrap())
        });
    }
    let (net, _) = fixture(4, 2, 0.0, 4);
    let layout = Layout::from_network(&net);
    let levels = candidate_levels(&layout, &cfg);
    group.bench_function("bruteforce/4", |b| {
        b.iter(|| brute_force_power(black_box(&layout), &cfg, &opts, &levels, 1_000_000).unwrap())
    });
    group.finish();
}

criterion_group!(benches, localization, anchoring, topology);
criterion_main!(benches);
