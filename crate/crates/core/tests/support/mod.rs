//! Independent dense reference implementations used as test oracles.
//! Everything here works on plain nested `Vec<f64>` with naive loops so it
//! shares no kernel code with the library.
#![allow(dead_code, clippy::needless_range_loop)]

use gallery_core::gallery::{Model, ModelConfig, ModelKind};
use gallery_core::graph::{Graph, Split};
use gallery_core::rng::{stream, Stream};
use gallery_core::tensor::{Activation, BackendId, CsrMatrix, DenseMatrix};
use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn to_mat(m: &DenseMatrix) -> Mat {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn from_mat(m: &Mat) -> DenseMatrix {
    DenseMatrix::from_rows(m).unwrap()
}

pub fn csr_to_mat(a: &CsrMatrix) -> Mat {
    let mut m = vec![vec![0.0; a.cols()]; a.rows()];
    for (r, row) in m.iter_mut().enumerate() {
        let (cols, vals) = a.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            row[c] += v;
        }
    }
    m
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let inner = b.len();
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            assert_eq!(row.len(), inner);
            (0..cols).map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum()).collect()
        })
        .collect()
}

pub fn add_bias(a: &Mat, b: &[f64]) -> Mat {
    a.iter().map(|r| r.iter().zip(b).map(|(x, y)| x + y).collect()).collect()
}

pub fn map(a: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    a.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect()
}

pub fn max_abs_diff(a: &Mat, b: &DenseMatrix) -> f64 {
    assert_eq!((a.len(), a.first().map_or(0, |r| r.len())), (b.rows(), b.cols()));
    let mut d: f64 = 0.0;
    for (r, row) in a.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            d = d.max((v - b.get(r, c)).abs());
        }
    }
    d
}

/// `max(A, A^T) + I`, symmetrically normalized.
pub fn dense_normalized(a: &CsrMatrix) -> Mat {
    let m = csr_to_mat(a);
    let n = m.len();
    let mut h = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            h[i][j] = m[i][j].max(m[j][i]);
        }
        h[i][i] += 1.0;
    }
    let deg: Vec<f64> = h.iter().map(|r| r.iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            h[i][j] /= (deg[i] * deg[j]).sqrt();
        }
    }
    h
}

pub fn dense_row_normalize(x: &DenseMatrix) -> Mat {
    to_mat(x)
        .into_iter()
        .map(|r| {
            let s: f64 = r.iter().map(|v| v.abs()).sum();
            if s > 0.0 {
                r.iter().map(|v| v / s).collect()
            } else {
                r
            }
        })
        .collect()
}

fn param(model: &Model, name: &str) -> Mat {
    to_mat(&model.params().by_name(name).unwrap_or_else(|| panic!("no parameter {name}")).value)
}

fn bias(model: &Model, name: &str) -> Vec<f64> {
    param(model, name).remove(0)
}

pub fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

pub fn elu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        v.exp() - 1.0
    }
}

fn act(kind: Activation) -> impl Fn(f64) -> f64 {
    move |v| match kind {
        Activation::Relu => relu(v),
        Activation::Elu => elu(v),
        Activation::LeakyRelu(s) => {
            if v > 0.0 {
                v
            } else {
                s * v
            }
        }
        Activation::Identity => v,
    }
}

/// Inference-mode logits computed densely from the model's parameters.
pub fn oracle_logits(model: &Model, g: &Graph) -> Mat {
    let s = dense_normalized(g.adjacency());
    let x = dense_row_normalize(g.features());
    let cfg = model.config();
    match cfg.kind {
        ModelKind::Gcn => {
            let layers = cfg.hidden_dims.len() + 1;
            let mut h = x;
            for l in 0..layers {
                h = add_bias(&matmul(&s, &matmul(&h, &param(model, &format!("w{l}")))), &bias(model, &format!("b{l}")));
                if l + 1 < layers {
                    h = map(&h, act(cfg.activation));
                }
            }
            h
        }
        ModelKind::Sgc => {
            let mut h = x;
            for _ in 0..cfg.k_hops.unwrap() {
                h = matmul(&s, &h);
            }
            add_bias(&matmul(&h, &param(model, "w")), &bias(model, "b"))
        }
        ModelKind::Gat => gat_oracle(model, &s, x),
    }
}

/// GAT with the full `n x n` attention matrix materialized per head.
fn gat_oracle(model: &Model, s: &Mat, x: Mat) -> Mat {
    let cfg = model.config();
    let n = s.len();
    let slope = cfg.negative_slope;
    let mut h = x;
    for (l, &heads) in cfg.heads.iter().enumerate() {
        let last = l + 1 == cfg.heads.len();
        let mut outs = Vec::new();
        for k in 0..heads {
            let wh = matmul(&h, &param(model, &format!("w{l}_h{k}")));
            let a_src = param(model, &format!("a_src{l}_h{k}"));
            let a_dst = param(model, &format!("a_dst{l}_h{k}"));
            let f1: Vec<f64> = matmul(&wh, &a_src).into_iter().map(|r| r[0]).collect();
            let f2: Vec<f64> = matmul(&wh, &a_dst).into_iter().map(|r| r[0]).collect();
            let mut alpha = vec![vec![0.0; n]; n];
            for i in 0..n {
                let mut e = vec![f64::NEG_INFINITY; n];
                for j in 0..n {
                    if s[i][j] != 0.0 {
                        let v = f1[i] + f2[j];
                        e[j] = if v > 0.0 { v } else { slope * v };
                    }
                }
                let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = e.iter().map(|v| (v - m).exp()).sum();
                for j in 0..n {
                    alpha[i][j] = (e[j] - m).exp() / z;
                }
            }
            outs.push(matmul(&alpha, &wh));
        }
        let b = bias(model, &format!("b{l}"));
        h = if last {
            let mut mean = vec![vec![0.0; outs[0][0].len()]; n];
            for o in &outs {
                for i in 0..n {
                    for (c, v) in o[i].iter().enumerate() {
                        mean[i][c] += v / heads as f64;
                    }
                }
            }
            add_bias(&mean, &b)
        } else {
            let cat: Mat = (0..n).map(|i| outs.iter().flat_map(|o| o[i].clone()).collect()).collect();
            map(&add_bias(&cat, &b), act(cfg.activation))
        };
    }
    h
}

/// Small random graph with arbitrary (not necessarily symmetric) weighted
/// edges, non-negative features and a split covering every node.
pub fn random_graph(n: usize, d: usize, c: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen::<f64>() < p {
                t.push((i, j, rng.gen_range(0.5..2.0)));
            }
        }
    }
    let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
    let x = DenseMatrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    let labels = (0..n).map(|i| (i + rng.gen_range(0..c)) % c).collect();
    let n_train = (n / 2).max(1);
    let n_val = ((n - n_train) / 2).max(1).min(n - n_train);
    let split = Split::new(
        (0..n_train).collect(),
        (n_train..n_train + n_val).collect(),
        (n_train + n_val..n).collect(),
        n,
    )
    .unwrap();
    Graph::new("random", a, x, labels, c, split).unwrap()
}

/// Small model config for fixtures: narrow layers, no dropout.
pub fn small_config(kind: ModelKind, seed: u64) -> ModelConfig {
    let mut c = ModelConfig::new(kind).without_dropout().with_seed(seed);
    match kind {
        ModelKind::Gcn => c.hidden_dims = vec![4],
        ModelKind::Sgc => {}
        ModelKind::Gat => {
            c.hidden_dims = vec![3];
            c.heads = vec![2, 2];
        }
    }
    c
}

pub fn built(config: ModelConfig, g: &Graph, backend: BackendId) -> Model {
    let mut m = Model::new(config, backend).unwrap();
    m.process(g).unwrap().build().unwrap();
    m
}

/// Randomizes every parameter (biases included) so that checks do not
/// depend on zero-initialized biases.
pub fn jitter_params(model: &mut Model, seed: u64) {
    let mut rng = stream(seed, Stream::Data);
    for p in model.params_mut().iter_mut() {
        for v in p.value.data_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
    }
}

fn loss(model: &Model, g: &Graph, rows: &[usize]) -> f64 {
    let mut tape = model.tape();
    let mut rng = stream(0, Stream::Dropout);
    let z = model.forward(&mut tape, false, &mut rng).unwrap();
    let l = tape.softmax_cross_entropy(z, g.labels(), rows).unwrap();
    tape.value(l).get(0, 0)
}

/// Relative error per parameter tensor between backprop gradients and
/// central differences with step `h`:
/// `||g_auto - g_fd|| / max(||g_auto||, ||g_fd||, GRAD_FLOOR)`.
/// The floor keeps gradients that are exactly zero in theory (GAT source
/// scores are constant inside a softmax segment unless LeakyReLU bends them)
/// from turning rounding noise into a ratio of 1.
pub fn gradient_check(model: &mut Model, g: &Graph, h: f64) -> Vec<(String, f64)> {
    let rows: Vec<usize> = (0..g.n_nodes()).collect();
    let mut tape = model.tape();
    let mut rng = stream(0, Stream::Dropout);
    let z = model.forward(&mut tape, false, &mut rng).unwrap();
    let l = tape.softmax_cross_entropy(z, g.labels(), &rows).unwrap();
    model.params_mut().zero_grad();
    tape.backward(l, model.params_mut()).unwrap();
    let analytic: Vec<DenseMatrix> = model.params().iter().map(|p| p.grad.clone()).collect();

    let mut out = Vec::new();
    for slot in 0..model.params().len() {
        let len = model.params().get(slot).value.data().len();
        let mut num = vec![0.0; len];
        for (i, slot_val) in num.iter_mut().enumerate() {
            let orig = model.params().get(slot).value.data()[i];
            model.params_mut().get_mut(slot).value.data_mut()[i] = orig + h;
            let up = loss(model, g, &rows);
            model.params_mut().get_mut(slot).value.data_mut()[i] = orig - h;
            let down = loss(model, g, &rows);
            model.params_mut().get_mut(slot).value.data_mut()[i] = orig;
            *slot_val = (up - down) / (2.0 * h);
        }
        let a = analytic[slot].data();
        let diff = a.iter().zip(&num).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nn = num.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = na.max(nn);
        let rel = diff / scale.max(GRAD_FLOOR);
        out.push((model.params().get(slot).name.clone(), rel));
    }
    model.params_mut().zero_grad();
    out
}

pub const GRAD_FLOOR: f64 = 1e-6;

/// Random permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.gen_range(0..=i));
    }
    p
}

/// Max deviation between `logits(permuted graph)` and the rows of
/// `logits(graph)` permuted, using identical parameters.
pub fn equivariance_error(kind: ModelKind, g: &Graph, perm: &[usize], seed: u64) -> f64 {
    let cfg = small_config(kind, seed);
    let mut a = built(cfg.clone(), g, BackendId::Sparse);
    jitter_params(&mut a, seed);
    let pg = g.permute(perm).unwrap();
    let mut b = built(cfg, &pg, BackendId::Sparse);
    *b.params_mut() = a.params().clone();
    let za = a.logits().unwrap();
    let zb = b.logits().unwrap();
    zb.max_abs_diff(&za.select_rows(perm))
}
