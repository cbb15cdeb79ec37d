//! Kernel and training-step timings on a Cora-sized synthetic graph.
//!
//! Each benchmark runs twice: inside a one-thread rayon pool (the sequential
//! path) and inside the default pool. Building with `--no-default-features`
//! removes rayon from the kernels entirely.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gallery_core::gallery::{Model, ModelConfig, ModelKind};
use gallery_core::graph::{synthetic_graph, Graph};
use gallery_core::pipeline::{self, TrainConfig};
use gallery_core::tensor::{matmul, BackendId, Context, DenseMatrix, EdgeIndex};
use gallery_core::transforms::normalize_pipeline;

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("seq", one), ("par", all)]
}

fn cora_like() -> Graph {
    synthetic_graph(2708, 1433, 7, 0.0015, 0).unwrap()
}

fn kernels(c: &mut Criterion) {
    let g = cora_like();
    let s = normalize_pipeline(g.adjacency()).unwrap();
    let x = g.features();
    let w = DenseMatrix::filled(x.cols(), 16, 0.01);
    let h = matmul(x, &w).unwrap();
    let edges = Arc::new(EdgeIndex::from_pattern(&s.matrix).unwrap());
    let weights = vec![0.1; edges.n_edges()];
    let ctx = Context::new(BackendId::Sparse);

    let mut group = c.benchmark_group("kernels");
    group.sample_size(20);
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::new("spmm_2708x16", label), |b| {
            b.iter(|| pool.install(|| ctx.spmm(&s.matrix, &h).unwrap()))
        });
        group.bench_function(BenchmarkId::new("matmul_2708x1433x16", label), |b| {
            b.iter(|| pool.install(|| matmul(x, &w).unwrap()))
        });
        group.bench_function(BenchmarkId::new("edge_aggregate_2708x16", label), |b| {
            b.iter(|| pool.install(|| ctx.edge_aggregate(&edges, &weights, &h).unwrap()))
        });
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let g = cora_like();
    let mut group = c.benchmark_group("train_epochs");
    group.sample_size(10);
    for kind in [ModelKind::Gcn, ModelKind::Gat] {
        for (label, pool) in pools() {
            let mut model = Model::new(ModelConfig::for_dataset(kind, "cora"), BackendId::Sparse).unwrap();
            model.process(&g).unwrap().build().unwrap();
            let cfg = TrainConfig {
                max_epochs: 5,
                patience: 0,
                ..TrainConfig::for_dataset(kind, "cora")
            };
            group.bench_function(BenchmarkId::new(format!("{kind}_5_epochs"), label), |b| {
                b.iter(|| pool.install(|| pipeline::train(&mut model, &g, &cfg).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, kernels, training);
criterion_main!(benches);
