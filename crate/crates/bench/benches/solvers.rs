use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mcbf_bench::{network, target_db, uniform_it};
use mcbf_core::coordination::{run_decentralized_qos, QosOptions};
use mcbf_core::mms::{mms_bisection, solve_wppm, MmsOptions, PowerBudget};
use mcbf_core::qos::{solve_centralized_sdr, solve_subproblem};

fn subproblem(c: &mut Criterion) {
    let mut group = c.benchmark_group("subproblem");
    for (n, k, nt) in [(2, 2, 4), (3, 2, 6)] {
        let ch = network(n, k, nt, 1);
        let it = uniform_it(&ch);
        let gamma = target_db(3.0);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{n}-{k}-{nt}")), &ch, |b, ch| {
            b.iter(|| solve_subproblem(0, black_box(ch), gamma, &it, 1.0).unwrap())
        });
    }
    group.finish();
}

fn centralized(c: &mut Criterion) {
    let ch = network(3, 2, 6, 2);
    let gamma = [target_db(6.0); 3];
    c.bench_function("centralized_sdr/3-2-6", |b| b.iter(|| solve_centralized_sdr(black_box(&ch), &gamma, 1.0).unwrap()));
}

fn decentralized(c: &mut Criterion) {
    let mut group = c.benchmark_group("decentralized_qos");
    group.sample_size(10);
    let ch = network(2, 2, 4, 3);
    let options = QosOptions {
        max_iter: 30,
        relaxed_only: true,
        ..QosOptions::default()
    };
    let gamma = [target_db(6.0); 2];
    group.bench_function("2-2-4/30_rounds", |b| b.iter(|| run_decentralized_qos(black_box(&ch), &gamma, 1.0, &options).unwrap()));
    group.finish();
}

fn max_min(c: &mut Criterion) {
    let mut group = c.benchmark_group("mms");
    group.sample_size(10);
    let ch = network(3, 2, 5, 4);
    let budget = PowerBudget::uniform(3, 10.0).unwrap();
    group.bench_function("wppm/3-2-5", |b| b.iter(|| solve_wppm(black_box(&ch), 4.0, &budget, 1.0).unwrap()));
    group.bench_function("bisection/3-2-5", |b| {
        b.iter(|| mms_bisection(black_box(&ch), &budget, 1.0, &MmsOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, subproblem, centralized, decentralized, max_min);
criterion_main!(benches);
