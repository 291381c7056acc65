use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use duotouch_core::sweep::{run_sweep_with, Execution, SweepPlan};

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("default_sweep");
    group.sample_size(10);
    for trials in [5u32, 20] {
        let plan = SweepPlan {
            trials,
            ..SweepPlan::default()
        };
        group.bench_with_input(BenchmarkId::new("sequential", trials), &plan, |b, p| {
            b.iter(|| run_sweep_with(p, Execution::Sequential).unwrap())
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", trials), &plan, |b, p| {
            b.iter(|| run_sweep_with(p, Execution::Parallel).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
