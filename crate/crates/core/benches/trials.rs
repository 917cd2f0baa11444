use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use sscover::edifice::HardInstance;
use sscover::instance::{gen_singleton_gap, Instance};
use sscover::par::Execution;
use sscover::sim::{run_trials, ExperimentConfig, Policy};

const TRIALS: u64 = 2000;

fn config(execution: Execution) -> ExperimentConfig {
    ExperimentConfig {
        seed: 1,
        trials: TRIALS,
        execution,
        ..Default::default()
    }
}

fn compare(c: &mut Criterion, name: &str, inst: &Instance, policy: Policy) {
    let mut group = c.benchmark_group(format!("{name}/{}", policy.name()));
    group.sample_size(10);
    group.throughput(Throughput::Elements(TRIALS));
    for (label, exec) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
        let cfg = config(exec);
        group.bench_with_input(BenchmarkId::from_parameter(label), &cfg, |b, cfg| {
            b.iter(|| run_trials(&policy, inst, cfg).unwrap())
        });
    }
    group.finish();
}

fn singleton_gap(c: &mut Criterion) {
    let inst = gen_singleton_gap(20).unwrap();
    compare(c, "gap20", &inst, Policy::RRound { r: 2 });
    compare(c, "gap20", &inst, Policy::AdaptiveGreedy);
}

fn edifice(c: &mut Criterion) {
    let hard = HardInstance::generate(5, 2).unwrap();
    compare(c, "edifice-5-2", &hard.instance, Policy::RRound { r: 1 });
    compare(c, "edifice-5-2", &hard.instance, Policy::Canonical);
}

criterion_group!(benches, singleton_gap, edifice);
criterion_main!(benches);
