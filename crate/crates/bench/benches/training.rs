use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qfl_core::autodiff::vjp;
use qfl_core::data::ClientDataset;
use qfl_core::federation::{aggregate, client_update_quorus, init_params};
use qfl_core::learning::{AdamConfig, AdamState};
use qfl_core::{build_model, AnsatzShape, ModelVariant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const QUBITS: usize = 10;

fn forward_and_vjp(c: &mut Criterion) {
    let mut group = c.benchmark_group("model");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..QUBITS).map(|_| rng.random_range(0.0..3.1)).collect();
    for variant in [
        ModelVariant::Plain,
        ModelVariant::Layerwise,
        ModelVariant::Funnel,
    ] {
        let model = build_model(variant, AnsatzShape::VShape, QUBITS, 6).unwrap();
        let p: Vec<f64> = (0..model.n_params())
            .map(|_| rng.random_range(-3.1..3.1))
            .collect();
        let w = vec![1.0; model.n_classifiers()];
        group.bench_function(BenchmarkId::new("forward", variant.name()), |b| {
            b.iter(|| model.forward(black_box(&x), &p).unwrap())
        });
        group.bench_function(BenchmarkId::new("vjp", variant.name()), |b| {
            b.iter(|| vjp(&model, black_box(&x), &p, &w).unwrap())
        });
    }
    group.finish();
}

fn server(c: &mut Criterion) {
    let sizes = vec![3 * QUBITS; 6];
    let global = init_params(&sizes, 0);
    let updates: Vec<(Vec<f64>, usize)> = (2..=6)
        .map(|d| (init_params(&sizes, d as u64).slice(d).unwrap(), d))
        .collect();
    c.bench_function("aggregate_5_clients", |b| {
        b.iter(|| aggregate(black_box(&global), &updates).unwrap())
    });
}

fn local_round(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let data = ClientDataset {
        features: (0..32)
            .map(|_| (0..QUBITS).map(|_| rng.random_range(0.0..3.1)).collect())
            .collect(),
        labels: (0..32).map(|i| (i % 2) as u8).collect(),
    };
    let model = build_model(ModelVariant::Layerwise, AnsatzShape::VShape, QUBITS, 6).unwrap();
    let start = init_params(&model.layer_sizes(), 0).flat();
    let mut adam = AdamState::new(model.n_params(), AdamConfig::default());
    let mut group = c.benchmark_group("client");
    group.sample_size(10);
    group.bench_function("quorus_batch_32", |b| {
        b.iter(|| {
            client_update_quorus(&model, start.clone(), &data, 1, 32, &mut adam, &mut rng).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, forward_and_vjp, server, local_round);
criterion_main!(benches);
