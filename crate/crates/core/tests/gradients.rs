mod support;

use gallery_core::gallery::ModelKind;
use gallery_core::tensor::BackendId;
use support::{built, gradient_check, jitter_params, random_graph, small_config};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn check(kind: ModelKind, backend: BackendId) {
    for seed in 0..4u64 {
        let n = 6 + seed as usize;
        let g = random_graph(n, 5, 3, 0.35, seed);
        let mut m = built(small_config(kind, seed), &g, backend);
        jitter_params(&mut m, 100 + seed);
        for (name, rel) in gradient_check(&mut m, &g, H) {
            assert!(rel < TOL, "{kind}/{backend:?} seed {seed} param {name}: rel err {rel:e}");
        }
    }
}

#[test]
fn gcn_gradients_match_finite_differences() {
    check(ModelKind::Gcn, BackendId::Sparse);
    check(ModelKind::Gcn, BackendId::Dense);
}

#[test]
fn sgc_gradients_match_finite_differences() {
    check(ModelKind::Sgc, BackendId::Sparse);
    check(ModelKind::Sgc, BackendId::Dense);
}

#[test]
fn gat_gradients_match_finite_differences() {
    check(ModelKind::Gat, BackendId::Sparse);
    check(ModelKind::Gat, BackendId::Dense);
}

#[test]
fn deeper_gcn_and_single_head_gat_gradients() {
    let g = random_graph(8, 4, 2, 0.4, 42);
    let mut cfg = small_config(ModelKind::Gcn, 1);
    cfg.hidden_dims = vec![5, 3];
    let mut m = built(cfg, &g, BackendId::Sparse);
    jitter_params(&mut m, 7);
    for (name, rel) in gradient_check(&mut m, &g, H) {
        assert!(rel < TOL, "gcn3 {name}: {rel:e}");
    }

    let mut cfg = small_config(ModelKind::Gat, 2);
    cfg.heads = vec![1, 1];
    let mut m = built(cfg, &g, BackendId::Sparse);
    jitter_params(&mut m, 8);
    for (name, rel) in gradient_check(&mut m, &g, H) {
        assert!(rel < TOL, "gat1 {name}: {rel:e}");
    }
}
