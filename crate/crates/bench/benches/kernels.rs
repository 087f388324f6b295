use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qfl_core::sim::rot_matrix;
use qfl_core::StateVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_state(n: usize, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = StateVector::new_zero_state(n).unwrap();
    for q in 0..n {
        s.apply_rot(q, rng.random(), rng.random(), rng.random())
            .unwrap();
    }
    s
}

fn gates(c: &mut Criterion) {
    let mut group = c.benchmark_group("gate");
    for n in [10, 15] {
        let mut s = random_state(n, 0);
        let m = rot_matrix(0.3, 1.1, -0.7);
        group.bench_with_input(BenchmarkId::new("single_qubit", n), &n, |b, &n| {
            b.iter(|| s.apply_matrix(black_box(n / 2), &m).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("cnot", n), &n, |b, &n| {
            b.iter(|| s.apply_cnot(black_box(1), black_box(n - 2)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("marginal", n), &n, |b, _| {
            b.iter(|| s.marginal_prob_one(black_box(0)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, gates);
criterion_main!(benches);
