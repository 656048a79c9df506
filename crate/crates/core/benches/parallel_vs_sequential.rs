use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gfield::fem::{assemble_precision, assess_correlation, AssessOptions, MaternParams};
use gfield::gmrf::factorize;
use gfield::mesh::{build_mesh, Mesh, MeshConfig};
use std::hint::black_box;

fn mesh() -> Mesh {
    let sq = [[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]];
    build_mesh(&sq, None, &MeshConfig::with_max_edge(0.35, 2.0)).unwrap()
}

/// Run `f` on a pool with `threads` workers (0 = rayon default).
#[cfg(feature = "parallel")]
fn on_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[cfg(not(feature = "parallel"))]
fn on_pool<T: Send>(_threads: usize, f: impl FnOnce() -> T + Send) -> T {
    f()
}

fn modes() -> Vec<(&'static str, usize)> {
    if gfield::par::is_parallel() {
        vec![("sequential", 1), ("parallel", 0)]
    } else {
        vec![("sequential", 1)]
    }
}

fn sampling(c: &mut Criterion) {
    let m = mesh();
    let p = MaternParams::new(2.0, 1.0, 1.0).unwrap().to_spde().unwrap();
    let g = factorize(&assemble_precision(&m, &p, None, None).unwrap()).unwrap();
    let mut group = c.benchmark_group("sample_256_draws");
    group.sample_size(10);
    for (name, threads) in modes() {
        group.bench_with_input(BenchmarkId::new(name, m.n_vertices()), &threads, |b, &t| b.iter(|| on_pool(t, || black_box(g.sample(256, 7)))));
    }
    group.finish();
}

fn assessment(c: &mut Criterion) {
    let m = mesh();
    let p = MaternParams::new(2.0, 1.0, 1.0).unwrap();
    let opts = AssessOptions::for_range(2.0);
    let mut group = c.benchmark_group("assess_correlation");
    group.sample_size(10);
    for (name, threads) in modes() {
        group.bench_with_input(BenchmarkId::new(name, m.n_vertices()), &threads, |b, &t| {
            b.iter(|| on_pool(t, || black_box(assess_correlation(&m, &p, &opts).unwrap())))
        });
    }
    group.finish();
}

criterion_group!(benches, sampling, assessment);
criterion_main!(benches);
