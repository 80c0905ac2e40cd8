use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use sinr_sched::exec::Execution;
use sinr_sched::harness::{run_scenario, Algorithm, NetSource, ScenarioConfig};
use sinr_sched::perturbed::check_a1_with;
use sinr_sched::region::enumerate_sm_with;
use sinr_sched::topology::{random_topology, TopologySpec};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn enumeration(c: &mut Criterion) {
    let net = random_topology(&TopologySpec::new(4, 7)).unwrap();
    let mut group = c.benchmark_group("enumerate_sm");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, "n4_m4"), &exec, |b, &exec| {
            b.iter(|| enumerate_sm_with(black_box(&net), 4, exec).unwrap())
        });
    }
    group.finish();
}

fn assumption_a1(c: &mut Criterion) {
    let net = random_topology(&TopologySpec::new(4, 7)).unwrap();
    let targets = vec![0.3; 4];
    let mut group = c.benchmark_group("check_a1");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, "n4_m3"), &exec, |b, &exec| {
            b.iter(|| check_a1_with(black_box(&net), &targets, 3, exec).unwrap())
        });
    }
    group.finish();
}

fn scenario(c: &mut Criterion) {
    let mut cfg = ScenarioConfig::new(NetSource::Random(TopologySpec::new(5, 1)), Algorithm::Itipbpp, 2);
    cfg.n_targets = 20;
    cfg.repetitions = 5;
    cfg.params.budget = 2_000;
    let mut group = c.benchmark_group("run_scenario");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, "n5_m2"), &exec, |b, &exec| {
            b.iter(|| run_scenario(black_box(&cfg), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = enumeration, assumption_a1, scenario
}
criterion_main!(benches);
