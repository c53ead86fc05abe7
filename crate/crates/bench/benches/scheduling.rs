use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use psp_bench::{instance, NEAR_IDEAL, NON_IDEAL};
use psp_core::oracle::{brute_force_peak, GridSearchConfig};
use psp_core::{power_profile, schedule_greedy, schedule_psp, DemandSet};

fn schedulers(c: &mut Criterion) {
    let mut group = c.benchmark_group("schedule");
    for n in [1_000usize, 10_000, 100_000, 1_000_000] {
        let (params, demands) = instance(n, NON_IDEAL, 1);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("psp", n), &demands, |b, d| {
            b.iter(|| schedule_psp(black_box(d), &params).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("greedy", n), &demands, |b, d| {
            b.iter(|| schedule_greedy(black_box(d), &params).unwrap())
        });
    }
    group.finish();
}

fn profiles(c: &mut Criterion) {
    let mut group = c.benchmark_group("power_profile");
    for n in [1_000usize, 100_000] {
        let (params, demands) = instance(n, NEAR_IDEAL, 2);
        let policy = schedule_psp(&demands, &params).unwrap();
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &policy, |b, p| {
            b.iter(|| power_profile(black_box(p)).unwrap())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let params = psp_bench::params(NON_IDEAL);
    let demands = DemandSet::from_energies(&[0.3, 0.2]).unwrap();
    let cfg = GridSearchConfig::new(0.02, 0.02).unwrap();
    c.bench_function("brute_force_peak/n2", |b| {
        b.iter(|| brute_force_peak(black_box(&demands), &params, &cfg).unwrap())
    });
}

criterion_group!(benches, schedulers, profiles, oracle);
criterion_main!(benches);
