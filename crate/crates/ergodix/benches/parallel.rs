//! Compares the data-parallel core against a single-thread baseline.
//!
//! With the default `parallel` feature each group benches the rayon path on
//! the default pool and again inside a one-thread pool; building with
//! `--no-default-features` benches the true sequential fallback instead.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use ergodix::testing::random_game;
use ergodix::{
    build_pair_finite, extract_policies, find_nontrivial_conjugate, simulate_stationary,
    solve_ergodic,
};

fn with_thread_variants<F: Fn() + Sync>(c: &mut Criterion, group: &str, f: F) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        g.bench_function("parallel", |b| b.iter(&f));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("single-thread pool");
        g.bench_function("one_thread", |b| b.iter(|| pool.install(&f)));
    }
    #[cfg(not(feature = "parallel"))]
    g.bench_function("sequential", |b| b.iter(&f));
    g.finish();
}

fn bench_build_pair(c: &mut Criterion) {
    let game = random_game(14, 3, 3, 2024);
    with_thread_variants(c, "build_pair_finite/n14", || {
        black_box(build_pair_finite(black_box(&game)).unwrap());
    });
}

fn bench_conjugate_scan(c: &mut Criterion) {
    let game = random_game(14, 3, 3, 2024);
    let pair = build_pair_finite(&game).unwrap();
    with_thread_variants(c, "conjugate_scan/n14", || {
        black_box(find_nontrivial_conjugate(black_box(&pair)).unwrap());
    });
}

fn bench_simulation(c: &mut Criterion) {
    let game = random_game(6, 2, 2, 7);
    let eigen = solve_ergodic(&game, 1e-9, 1_000_000).expect("solve");
    let policies = extract_policies(&game, &eigen.u, 1e-8).expect("policies");
    with_thread_variants(c, "simulate/6x500x200", || {
        black_box(simulate_stationary(black_box(&game), &policies, 500, 200, 11).unwrap());
    });
}

criterion_group!(
    benches,
    bench_build_pair,
    bench_conjugate_scan,
    bench_simulation
);
criterion_main!(benches);
