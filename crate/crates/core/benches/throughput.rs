use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ecap_core::harness::{evaluate, gen_domain_pair, run_experiment_with, PixelClassifier, SyntheticSceneConfig, TrainConfig, Variant};
use ecap_core::Exec;

fn executors() -> Vec<(&'static str, Exec)> {
    vec![
        ("sequential", Exec::Sequential),
        #[cfg(feature = "parallel")]
        ("parallel", Exec::Parallel),
    ]
}

fn scene(size: usize) -> SyntheticSceneConfig {
    SyntheticSceneConfig {
        height: size,
        width: size,
        n_source: 4,
        n_target: 20,
        ..Default::default()
    }
}

fn forward_backward(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_backward");
    for size in [32, 128] {
        let data = gen_domain_pair(&scene(size), 0).unwrap();
        let model = PixelClassifier::init(16, 5, &mut ChaCha8Rng::seed_from_u64(0));
        let x = &data.source[0];
        let y = x.one_hot();
        let q = vec![1.0; size * size];
        for (name, exec) in executors() {
            group.bench_with_input(BenchmarkId::new(name, size), &exec, |b, &exec| {
                b.iter(|| model.forward_backward(&x.image, &y, &q, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn held_out_eval(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate");
    let data = gen_domain_pair(&scene(64), 0).unwrap();
    let model = PixelClassifier::init(16, 5, &mut ChaCha8Rng::seed_from_u64(0));
    for (name, exec) in executors() {
        group.bench_function(name, |b| b.iter(|| evaluate(&model, &data.target_eval, exec).unwrap()));
    }
    group.finish();
}

fn seed_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("seed_sweep");
    group.sample_size(10);
    let cfg = TrainConfig {
        scene: scene(32),
        iterations: 40,
        metric_window: 10,
        split_window: 10,
        ..Default::default()
    };
    for (name, exec) in executors() {
        group.bench_function(name, |b| {
            b.iter(|| {
                exec.map_range(4, |seed| {
                    run_experiment_with(&cfg, Variant::Ecap, seed as u64, Exec::Sequential, &mut |_| {})
                        .unwrap()
                        .metrics
                        .miou
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, forward_backward, held_out_eval, seed_sweep);
criterion_main!(benches);
