//! Rayon versus sequential execution of the hot kernels.
//!
//! Every benchmark runs twice: once on the default path (rayon when the
//! `parallel` feature is on) and once inside `parallel::sequential`.

use std::hint::black_box;

use acubenet::model::{Model, ModelConfig, Task};
use acubenet::parallel;
use acubenet::tensor::{kernels, Graph, Shape, Tensor};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Runs `f` on the default path or the forced-sequential path.
fn in_mode<R>(mode: &str, f: impl FnOnce() -> R) -> R {
    match mode {
        "sequential" => parallel::sequential(f),
        _ => f(),
    }
}

const MODES: [&str; 2] = ["parallel", "sequential"];

fn conv(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let xs = Shape::new(4, 64, 48, 48);
    let x = random(xs.numel(), &mut rng);
    let w = random(64 * 64 * 9, &mut rng);
    let bias = random(64, &mut rng);
    let grad = random(xs.numel(), &mut rng);

    let mut group = c.benchmark_group("conv3x3_64ch_4x48x48");
    group.sample_size(10);
    for mode in MODES {
        group.bench_function(BenchmarkId::new("forward", mode), |b| {
            b.iter(|| in_mode(mode, || kernels::conv2d_forward(black_box(&x), xs, &w, &bias, 64, 3)))
        });
        group.bench_function(BenchmarkId::new("backward_input", mode), |b| {
            b.iter(|| in_mode(mode, || kernels::conv2d_backward_input(black_box(&grad), xs, &w, 64, 3)))
        });
        group.bench_function(BenchmarkId::new("backward_params", mode), |b| {
            b.iter(|| in_mode(mode, || kernels::conv2d_backward_params(black_box(&grad), &x, xs, 64, 3)))
        });
    }
    group.finish();
}

fn model(c: &mut Criterion) {
    let cfg = ModelConfig {
        trunk_channels: 16,
        num_groups: 2,
        units_per_group: 2,
        bottleneck_ratio: 4,
        ..ModelConfig::for_task(Task::Denoise)
    };
    let model = Model::build(&cfg, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = Tensor::from_fn(Shape::new(2, 1, 48, 48), |_| rng.random_range(0.0..1.0));
    let target = x.map(|v| 1.0 - v);

    let mut group = c.benchmark_group("model_c16_g2_u2_2x48x48");
    group.sample_size(10);
    for mode in MODES {
        group.bench_function(BenchmarkId::new("infer", mode), |b| {
            b.iter(|| in_mode(mode, || model.infer(black_box(&x)).unwrap()))
        });
        group.bench_function(BenchmarkId::new("train_step", mode), |b| {
            b.iter(|| {
                in_mode(mode, || {
                    let mut store = model.params.clone();
                    let g = Graph::new();
                    let y = model.forward_with(&g, &store, &g.constant(x.clone())).unwrap();
                    let loss = g.l2_loss(&y, &g.constant(target.clone())).unwrap();
                    g.backward(&loss, &mut store).unwrap();
                    store
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, conv, model);
criterion_main!(benches);
