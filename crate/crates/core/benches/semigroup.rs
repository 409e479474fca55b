use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hjdisc_core::exec::Execution;
use hjdisc_core::grid::GridFn;
use hjdisc_core::model::presets::pendulum_sine;
use hjdisc_core::semigroup::{BackwardScheme, SemigroupConfig};
use std::hint::black_box;

fn step(c: &mut Criterion) {
    let model = pendulum_sine(1.0);
    let mut group = c.benchmark_group("backward_step");
    for n in [512usize, 2048] {
        for (label, execution) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
            let cfg = SemigroupConfig { n, execution, ..Default::default() };
            let scheme = BackwardScheme::new(&model, &cfg).unwrap();
            let phi = GridFn::from_fn(cfg.grid().unwrap(), |x| x.sin() + 0.3 * (2.0 * x).cos()).unwrap();
            group.bench_with_input(BenchmarkId::new(label, n), &phi, |b, phi| {
                b.iter(|| scheme.apply(black_box(phi)).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, step);
criterion_main!(benches);
