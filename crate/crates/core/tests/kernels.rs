mod support;

use std::sync::Arc;

use gallery_core::autodiff::{ParamStore, Tape};
use gallery_core::tensor::{row_softmax, segment_softmax, spmm, BackendId, Context, CsrMatrix, DenseMatrix, EdgeIndex};
use gallery_core::transforms::{
    add_self_loops, normalize_pipeline, row_normalize_features, sgc_precompute, symmetric_normalize, to_undirected,
};
use proptest::prelude::*;
use support::*;

const TOL: f64 = 1e-10;

/// Relative to the oracle's largest magnitude, floored at 1.
fn close(oracle: &Mat, got: &DenseMatrix) -> bool {
    let scale = oracle.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    max_abs_diff(oracle, got) <= TOL * scale
}

fn csr(rows: usize, cols: usize, max_nnz: usize, nonneg: bool) -> impl Strategy<Value = CsrMatrix> {
    let lo = if nonneg { 0.0 } else { -2.0 };
    prop::collection::vec((0..rows, 0..cols, lo..2.0f64), 0..=max_nnz)
        .prop_map(move |t| CsrMatrix::from_triplets(rows, cols, &t).unwrap())
}

fn dense(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-3.0..3.0f64, rows * cols).prop_map(move |v| DenseMatrix::from_vec(rows, cols, v).unwrap())
}

fn spmm_case() -> impl Strategy<Value = (CsrMatrix, DenseMatrix)> {
    (1..=50usize, 1..=50usize, 1..=8usize).prop_flat_map(|(r, c, k)| (csr(r, c, r * 3, false), dense(c, k)))
}

fn square_case(nonneg: bool) -> impl Strategy<Value = CsrMatrix> {
    (1..=50usize).prop_flat_map(move |n| csr(n, n, n * 3, nonneg))
}

fn graph_case() -> impl Strategy<Value = (CsrMatrix, DenseMatrix)> {
    (1..=50usize, 1..=6usize).prop_flat_map(|(n, d)| {
        (
            csr(n, n, n * 3, true),
            prop::collection::vec(0.0..3.0f64, n * d).prop_map(move |v| DenseMatrix::from_vec(n, d, v).unwrap()),
        )
    })
}

fn mat_pow_apply(s: &Mat, x: Mat, k: usize) -> Mat {
    (0..k).fold(x, |h, _| matmul(s, &h))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn spmm_matches_dense_matmul((s, x) in spmm_case()) {
        let oracle = matmul(&csr_to_mat(&s), &to_mat(&x));
        prop_assert!(close(&oracle, &spmm(&s, &x).unwrap()));
        for b in [BackendId::Dense, BackendId::Sparse] {
            prop_assert!(close(&oracle, &Context::new(b).spmm(&s, &x).unwrap()));
        }
    }

    #[test]
    fn transposed_spmm_agrees_across_backends((s, x) in spmm_case()) {
        let g = DenseMatrix::from_vec(s.rows(), x.cols(), x.data().iter().cycle().take(s.rows() * x.cols()).copied().collect()).unwrap();
        let mut st = vec![vec![0.0; s.rows()]; s.cols()];
        for (r, row) in csr_to_mat(&s).iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                st[c][r] = *v;
            }
        }
        let oracle = matmul(&st, &to_mat(&g));
        for b in [BackendId::Dense, BackendId::Sparse] {
            prop_assert!(close(&oracle, &Context::new(b).spmm_transposed(&s, &g).unwrap()));
        }
    }

    #[test]
    fn canonicalize_is_idempotent(s in square_case(false)) {
        let once = s.canonicalize();
        prop_assert_eq!(&once, &s);
        prop_assert_eq!(once.canonicalize(), once.clone());
        prop_assert!(once.values().iter().all(|&v| v != 0.0));
        for r in 0..once.rows() {
            prop_assert!(once.row(r).0.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn row_softmax_normalizes_and_ignores_shifts(x in (1..=20usize, 1..=10usize).prop_flat_map(|(r, c)| dense(r, c)), shift in -50.0..50.0f64) {
        let p = row_softmax(&x);
        for r in 0..p.rows() {
            prop_assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert!(p.row(r).iter().all(|&v| v > 0.0));
        }
        let q = row_softmax(&x.map(|v| v + shift));
        prop_assert!(p.max_abs_diff(&q) < 1e-12);
    }

    #[test]
    fn segment_softmax_on_one_segment_is_row_softmax(v in prop::collection::vec(-10.0..10.0f64, 1..30)) {
        let seg = vec![0usize; v.len()];
        let a = segment_softmax(&v, &seg, 1).unwrap();
        let b = row_softmax(&DenseMatrix::row_vector(v.clone()));
        for (x, y) in a.iter().zip(b.data()) {
            prop_assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn edge_aggregation_agrees_across_backends(a in square_case(true), d in 1..5usize, seed in any::<u64>()) {
        let n = a.rows();
        let e = EdgeIndex::from_pattern(&add_self_loops(&a, 1.0).unwrap()).unwrap();
        let w: Vec<f64> = (0..e.n_edges()).map(|i| ((i as u64 ^ seed) % 97) as f64 / 97.0 - 0.3).collect();
        let x = DenseMatrix::from_vec(n, d, (0..n * d).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let mut oracle = vec![vec![0.0; d]; n];
        for (k, (&dst, &src)) in e.dst().iter().zip(e.src()).enumerate() {
            for (c, o) in oracle[dst].iter_mut().enumerate() {
                *o += w[k] * x.get(src, c);
            }
        }
        for b in [BackendId::Dense, BackendId::Sparse] {
            prop_assert!(close(&oracle, &Context::new(b).edge_aggregate(&e, &w, &x).unwrap()));
        }
    }

    #[test]
    fn transforms_match_dense_oracles((a, x) in graph_case()) {
        let n = a.rows();
        let m = csr_to_mat(&a);
        let und = csr_to_mat(&to_undirected(&a).unwrap());
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(und[i][j], m[i][j].max(m[j][i]));
            }
        }
        let loops = csr_to_mat(&add_self_loops(&a, 1.0).unwrap());
        for i in 0..n {
            for j in 0..n {
                let expect = m[i][j] + if i == j { 1.0 } else { 0.0 };
                prop_assert!((loops[i][j] - expect).abs() < 1e-15);
            }
        }
        let s = normalize_pipeline(&a).unwrap();
        let oracle = dense_normalized(&a);
        prop_assert!(close(&oracle, &s.matrix.to_dense()));
        prop_assert!(close(&dense_row_normalize(&x), &row_normalize_features(&x)));
        for k in 0..4 {
            let expect = mat_pow_apply(&oracle, to_mat(&x), k);
            prop_assert!(close(&expect, &sgc_precompute(&s, &x, k).unwrap()));
        }
    }

    #[test]
    fn normalization_preserves_symmetry_and_never_fails_with_self_loops(a in square_case(true)) {
        let und = to_undirected(&a).unwrap();
        let s = symmetric_normalize(&add_self_loops(&und, 1.0).unwrap()).unwrap();
        prop_assert!(s.matrix.is_symmetric_within(1e-12));
        prop_assert!(s.matrix.values().iter().all(|&v| v > 0.0 && v <= 1.0));
        // Directed input: no symmetry promise, but it must still normalize.
        prop_assert!(symmetric_normalize(&add_self_loops(&a, 1.0).unwrap()).is_ok());
    }

    #[test]
    fn sgc_precompute_composes((a, x) in graph_case(), j in 0..4usize, k in 0..4usize) {
        let s = normalize_pipeline(&a).unwrap();
        let direct = sgc_precompute(&s, &x, j + k).unwrap();
        let staged = sgc_precompute(&s, &sgc_precompute(&s, &x, k).unwrap(), j).unwrap();
        prop_assert!(direct.max_abs_diff(&staged) < 1e-8);
    }

    #[test]
    fn spmm_backward_is_the_transposed_product((s, x) in spmm_case()) {
        let s = Arc::new(s);
        let g = DenseMatrix::from_vec(s.rows(), x.cols(), (0..s.rows() * x.cols()).map(|i| (i as f64).cos()).collect()).unwrap();
        let mut st = vec![vec![0.0; s.rows()]; s.cols()];
        for (r, row) in csr_to_mat(&s).iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                st[c][r] = *v;
            }
        }
        let oracle = matmul(&st, &to_mat(&g));
        for b in [BackendId::Dense, BackendId::Sparse] {
            let mut tape = Tape::retained(Context::new(b));
            let xv = tape.variable(x.clone(), true);
            let y = tape.spmm(&s, xv).unwrap();
            tape.backward_with(y, g.clone(), &mut ParamStore::new()).unwrap();
            prop_assert!(close(&oracle, &tape.grad(xv)));
        }
    }
}

#[test]
fn gradients_accumulate_over_repeated_uses() {
    let x = DenseMatrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]).unwrap();
    let mut tape = Tape::retained(Context::new(BackendId::Sparse));
    let xv = tape.variable(x.clone(), true);
    let y = tape.add(xv, xv).unwrap();
    let z = tape.mul(y, xv).unwrap();
    let loss = tape.sum(z);
    tape.backward(loss, &mut ParamStore::new()).unwrap();
    // d/dx sum(2x * x) = 4x
    assert_eq!(tape.grad(xv), x.scale(4.0));
}

#[test]
fn one_hundred_seeded_fixtures_match_oracles() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let n = rng.gen_range(1..=50);
        let d = rng.gen_range(1..=8);
        let g = random_graph(n, d, 2.min(n).max(1) + 1, rng.gen_range(0.0..0.3), case);
        let s = g.adjacency();
        let oracle = matmul(&csr_to_mat(s), &to_mat(g.features()));
        for b in [BackendId::Dense, BackendId::Sparse] {
            assert!(close(&oracle, &Context::new(b).spmm(s, g.features()).unwrap()), "case {case}");
        }
        let norm = normalize_pipeline(s).unwrap();
        assert!(close(&dense_normalized(s), &norm.matrix.to_dense()), "case {case}");
    }
}
