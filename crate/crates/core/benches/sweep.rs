use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ntn_rrm::channel::ChannelState;
use ntn_rrm::config::{Config, Policy};
use ntn_rrm::harness::{self, RunPlan};
use ntn_rrm::par::Execution;
use ntn_rrm::scenario::{self, PositionLabel};

fn plan(exec: Execution) -> RunPlan {
    let mut cfg = Config::default();
    cfg.plan.hours = vec![5, 20];
    cfg.plan.seeds = vec![1];
    cfg.plan.policies = vec![Policy::Blaster, Policy::Heuristic, Policy::Tn];
    cfg.plan.write_traces = false;
    let mut p = RunPlan::new(cfg).expect("valid plan");
    p.exec = exec;
    p
}

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, exec) in [("Parallel", Execution::Parallel), ("Sequential", Execution::Sequential)] {
        let p = plan(exec);
        group.bench_with_input(BenchmarkId::new("run_plan", name), &p, |b, p| b.iter(|| harness::run_plan(p).expect("plan runs")));
    }
    group.finish();
}

fn channel(c: &mut Criterion) {
    let cfg = Config::default();
    let grid = scenario::build_grid(&cfg.area, &cfg.terrestrial_site).expect("grid");
    let snap = harness::build_snapshot(&cfg, &grid, 20, 1, PositionLabel::P2, Execution::Sequential).expect("snapshot");
    let mut group = c.benchmark_group("channel_build");
    for (name, exec) in [("Parallel", Execution::Parallel), ("Sequential", Execution::Sequential)] {
        group.bench_function(name, |b| b.iter(|| ChannelState::build(&snap.scenario, &cfg.channel, 7, exec).expect("channel")));
    }
    group.finish();
}

criterion_group!(benches, sweep, channel);
criterion_main!(benches);
