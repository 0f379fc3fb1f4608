//! Sequential vs worker-pool execution of the two hot paths: one
//! measurement step on a large branch pool, and a batch of independent draws.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tgbs::gaussian::{apply_interferometer, haar_unitary, squeezed_vacuum, squeezing_from_db};
use tgbs::mixture::StateMixture;
use tgbs::rng::stream;
use tgbs::{GaussianState, Parallelism, Sampler, StepConfig};

fn instance(modes: usize) -> GaussianState {
    let mut rng = stream(7, "bench", 0);
    let u = haar_unitary(modes, &mut rng).unwrap();
    let r = vec![squeezing_from_db(8.0); modes];
    apply_interferometer(&squeezed_vacuum(&r).unwrap(), &u).unwrap()
}

fn configs() -> Vec<(&'static str, StepConfig)> {
    let seq = StepConfig::sequential();
    let mut out = vec![("sequential", seq)];
    // at least two workers so the pool path is exercised on small machines
    let par = Parallelism::with_workers(tgbs::exec::available_workers().max(2));
    if par.is_parallel() {
        out.push(("parallel", StepConfig { parallelism: par, ..seq }));
    }
    out
}

/// `clicks` forced clicks on the first measured modes, then time one more
/// click step on the resulting `2^clicks` branches.
fn step(c: &mut Criterion) {
    let modes = 24;
    let mut group = c.benchmark_group("click_step");
    group.sample_size(20);
    for clicks in [6, 8, 10] {
        let mut mixture = StateMixture::new(&instance(modes));
        for mode in (modes - clicks..modes).rev() {
            mixture = mixture
                .measure_mode(mode, Some(true), 0.0, &StepConfig::sequential())
                .unwrap()
                .mixture;
        }
        let target = modes - clicks - 1;
        for (name, cfg) in configs() {
            group.bench_with_input(BenchmarkId::new(name, clicks), &clicks, |b, _| {
                b.iter(|| black_box(mixture.measure_mode(target, Some(true), 0.0, &cfg).unwrap()))
            });
        }
    }
    group.finish();
}

fn draws(c: &mut Criterion) {
    let mut group = c.benchmark_group("draw_batch");
    group.sample_size(10);
    for modes in [8, 12] {
        for (name, cfg) in configs() {
            let sampler = Sampler::new(instance(modes), None, 1, cfg).unwrap();
            group.bench_with_input(BenchmarkId::new(name, modes), &modes, |b, _| {
                b.iter(|| black_box(sampler.draw_batch(0, 256, None)))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, step, draws);
criterion_main!(benches);
