//! Graph preprocessing: symmetrization, self-loops, the normalized GCN
//! propagation operator, feature normalization and SGC propagation.
//!
//! The standard adjacency pipeline is
//! `to_undirected -> add_self_loops -> symmetric_normalize`; see [`normalize_pipeline`].

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::tensor::{Context, CsrMatrix, DenseMatrix};

/// The operator `S = D^-1/2 (A + I) D^-1/2` together with a fingerprint of
/// the adjacency it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    pub matrix: Arc<CsrMatrix>,
    pub source_hash: u64,
}

fn require_square(op: &'static str, a: &CsrMatrix) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::dim(op, format!("expected a square matrix, got {}x{}", a.rows(), a.cols())))
    }
}

/// Elementwise `max(A, A^T)`.
pub fn to_undirected(a: &CsrMatrix) -> Result<CsrMatrix> {
    require_square("to_undirected", a)?;
    let t = a.transpose();
    let n = a.rows();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(a.nnz() * 2);
    let mut values = Vec::with_capacity(a.nnz() * 2);
    indptr.push(0);
    for r in 0..n {
        let (ca, va) = a.row(r);
        let (ct, vt) = t.row(r);
        let (mut i, mut j) = (0, 0);
        while i < ca.len() || j < ct.len() {
            let (c, v) = match (ca.get(i), ct.get(j)) {
                (Some(&x), Some(&y)) if x == y => {
                    i += 1;
                    j += 1;
                    (x, va[i - 1].max(vt[j - 1]))
                }
                (Some(&x), Some(&y)) if x < y => {
                    i += 1;
                    (x, va[i - 1].max(0.0))
                }
                (Some(&x), None) => {
                    i += 1;
                    (x, va[i - 1].max(0.0))
                }
                (_, Some(&y)) => {
                    j += 1;
                    (y, vt[j - 1].max(0.0))
                }
                (None, None) => unreachable!(),
            };
            if v != 0.0 {
                indices.push(c);
                values.push(v);
            }
        }
        indptr.push(indices.len());
    }
    CsrMatrix::from_canonical_parts(n, n, indptr, indices, values)
}

/// Adds `fill` to every diagonal entry, creating the entries that are absent.
pub fn add_self_loops(a: &CsrMatrix, fill: f64) -> Result<CsrMatrix> {
    require_square("add_self_loops", a)?;
    let mut triplets = Vec::with_capacity(a.nnz() + a.rows());
    for r in 0..a.rows() {
        let (cols, vals) = a.row(r);
        triplets.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, v)));
        triplets.push((r, r, fill));
    }
    CsrMatrix::from_triplets(a.rows(), a.cols(), &triplets)
}

/// `S[i,j] = A[i,j] / sqrt(deg(i) deg(j))` with `deg` the row sums.
pub fn symmetric_normalize(a_hat: &CsrMatrix) -> Result<NormalizedAdjacency> {
    require_square("symmetric_normalize", a_hat)?;
    if let Some(v) = a_hat.values().iter().find(|&&v| v < 0.0) {
        return Err(Error::Validation(format!("adjacency has negative entry {v}")));
    }
    let deg = a_hat.row_sums();
    if let Some(i) = deg.iter().position(|&d| d <= 0.0) {
        return Err(Error::Degenerate(format!(
            "node {i} has zero degree; add self-loops before normalizing"
        )));
    }
    let matrix = a_hat.map_values(|r, c, v| v / (deg[r] * deg[c]).sqrt());
    Ok(NormalizedAdjacency {
        matrix: Arc::new(matrix),
        source_hash: a_hat.fingerprint(),
    })
}

/// Divides each row by its L1 norm; zero rows stay zero.
pub fn row_normalize_features(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let s: f64 = row.iter().map(|v| v.abs()).sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
    out
}

/// `S^k X` by repeated sparse products.
pub fn sgc_precompute(s: &NormalizedAdjacency, x: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    sgc_precompute_in(&Context::default(), s, x, k)
}

/// [`sgc_precompute`] with the products dispatched on `ctx`'s backend.
pub fn sgc_precompute_in(ctx: &Context, s: &NormalizedAdjacency, x: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    if s.matrix.cols() != x.rows() {
        return Err(Error::dim(
            "sgc_precompute",
            format!("operator is {}x{}, features have {} rows", s.matrix.rows(), s.matrix.cols(), x.rows()),
        ));
    }
    let mut h = x.clone();
    for _ in 0..k {
        h = ctx.spmm(&s.matrix, &h)?;
    }
    Ok(h)
}

/// Runs the full adjacency pipeline without caching.
pub fn normalize_pipeline(a: &CsrMatrix) -> Result<NormalizedAdjacency> {
    let undirected = to_undirected(a)?;
    let mut s = symmetric_normalize(&add_self_loops(&undirected, 1.0)?)?;
    s.source_hash = a.fingerprint();
    Ok(s)
}

/// Read-mostly cache of normalized operators keyed by adjacency fingerprint.
/// Share one behind an `Arc` so repeated builds on a dataset reuse `S`.
#[derive(Default)]
pub struct NormCache {
    map: RwLock<HashMap<u64, Arc<NormalizedAdjacency>>>,
}

impl NormCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(&self, a: &CsrMatrix) -> Result<Arc<NormalizedAdjacency>> {
        let key = a.fingerprint();
        if let Some(s) = self.map.read().expect("cache lock poisoned").get(&key) {
            return Ok(Arc::clone(s));
        }
        let s = Arc::new(normalize_pipeline(a)?);
        let mut map = self.map.write().expect("cache lock poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(s)))
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.write().expect("cache lock poisoned").clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ops;

    fn path3() -> CsrMatrix {
        CsrMatrix::from_triplets(3, 3, &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)]).unwrap()
    }

    #[test]
    fn undirected_single_edge() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]).unwrap();
        let u = to_undirected(&a).unwrap();
        assert_eq!(u.get(0, 1), 1.0);
        assert_eq!(u.get(1, 0), 1.0);
        assert_eq!(to_undirected(&u).unwrap(), u);
        assert!(to_undirected(&CsrMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn self_loops() {
        assert_eq!(add_self_loops(&CsrMatrix::zeros(3, 3), 1.0).unwrap(), CsrMatrix::identity(3));
        let two = add_self_loops(&CsrMatrix::identity(3), 1.0).unwrap();
        assert_eq!(two.to_dense(), DenseMatrix::identity(3).scale(2.0));
        let p = add_self_loops(&path3(), 1.0).unwrap();
        assert_eq!(p.get(1, 1), 1.0);
        assert_eq!(p.get(1, 2), 1.0);
        assert_eq!(p.nnz(), 7);
    }

    #[test]
    fn normalize_examples() {
        let s = symmetric_normalize(&CsrMatrix::identity(4)).unwrap();
        assert_eq!(*s.matrix, CsrMatrix::identity(4));
        let ones = CsrMatrix::from_dense(&DenseMatrix::filled(2, 2, 1.0));
        let s = symmetric_normalize(&ones).unwrap();
        assert_eq!(s.matrix.to_dense(), DenseMatrix::filled(2, 2, 0.5));

        let s = symmetric_normalize(&add_self_loops(&path3(), 1.0).unwrap()).unwrap();
        let m = &s.matrix;
        let r6 = 1.0 / 6f64.sqrt();
        assert!((m.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((m.get(0, 1) - r6).abs() < 1e-15);
        assert!((m.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.get(1, 2) - r6).abs() < 1e-15);
        assert!((m.get(2, 2) - 0.5).abs() < 1e-15);
        assert!(m.is_symmetric_within(1e-12));
    }

    #[test]
    fn zero_degree_is_degenerate() {
        assert!(matches!(symmetric_normalize(&CsrMatrix::zeros(2, 2)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn feature_rows() {
        let x = DenseMatrix::from_rows(&[[1.0, 3.0], [2.0, 2.0], [0.0, 0.0]]).unwrap();
        let y = row_normalize_features(&x);
        assert_eq!(y, DenseMatrix::from_rows(&[[0.25, 0.75], [0.5, 0.5], [0.0, 0.0]]).unwrap());
        let onehot = DenseMatrix::identity(3);
        assert_eq!(row_normalize_features(&onehot), onehot);
    }

    #[test]
    fn sgc_edge_cases() {
        let x = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let s = normalize_pipeline(&path3()).unwrap();
        assert_eq!(sgc_precompute(&s, &x, 0).unwrap(), x);
        let eye = normalize_pipeline(&CsrMatrix::zeros(3, 3)).unwrap();
        assert_eq!(sgc_precompute(&eye, &x, 5).unwrap(), x);
        let sd = s.matrix.to_dense();
        let oracle = ops::matmul(&sd, &ops::matmul(&sd, &x).unwrap()).unwrap();
        assert!(sgc_precompute(&s, &x, 2).unwrap().max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn cache_reuses_operator() {
        let cache = NormCache::new();
        let a = cache.get_or_compute(&path3()).unwrap();
        let b = cache.get_or_compute(&path3()).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
    }
}
