use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use dfsched::workbench::run_cell;
use dfsched::{optimal, partition, sim, Limits, MsrWeights, Policy, Strategy};
use dfsched_bench::{preset, small};

fn partitioners(c: &mut Criterion) {
    let (instance, groups) = preset("convolutional_network", 7);
    let mut group = c.benchmark_group("partition/convolutional_network");
    for strategy in Strategy::ALL {
        group.bench_with_input(BenchmarkId::from_parameter(strategy), &strategy, |b, &s| {
            b.iter(|| partition(s, &instance.graph, &instance.cluster, &groups, 3).unwrap())
        });
    }
    group.finish();
}

fn schedulers(c: &mut Criterion) {
    let (instance, groups) = preset("recurrent_network", 7);
    let assignment = partition(
        Strategy::Heft,
        &instance.graph,
        &instance.cluster,
        &groups,
        0,
    )
    .unwrap()
    .assignment;
    let mut group = c.benchmark_group("simulate/recurrent_network");
    group.sample_size(20);
    for policy in Policy::all(MsrWeights::default()) {
        group.bench_with_input(BenchmarkId::from_parameter(policy), &policy, |b, p| {
            b.iter(|| sim::run(&instance.graph, &instance.cluster, &assignment, p, 1).unwrap())
        });
    }
    group.finish();
}

fn full_cell(c: &mut Criterion) {
    let (instance, groups) = preset("dynamic_rnn", 7);
    let policy = Policy::Pct;
    let mut group = c.benchmark_group("cell/dynamic_rnn");
    group.sample_size(10);
    group.bench_function("critical_path+pct", |b| {
        b.iter(|| {
            run_cell(
                &instance.graph,
                &instance.cluster,
                &groups,
                Strategy::CriticalPath,
                &policy,
                0,
            )
            .unwrap()
        })
    });
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    for vertices in [4, 6, 8] {
        group.bench_with_input(
            BenchmarkId::new("vertices", vertices),
            &vertices,
            |b, &n| {
                b.iter_batched(
                    || small(n, 3, 11),
                    |(instance, groups)| {
                        optimal(
                            &instance.graph,
                            &instance.cluster,
                            &groups,
                            Limits::default(),
                        )
                        .unwrap()
                    },
                    BatchSize::SmallInput,
                )
            },
        );
    }
    group.finish();
}

criterion_group!(benches, partitioners, schedulers, full_cell, oracle);
criterion_main!(benches);
