use super::{CsrMatrix, DenseMatrix};
use crate::error::{Error, Result};
use crate::par;

/// Edge list of a graph, ordered by destination and then source, with
/// offsets so each destination's incoming edges form one contiguous segment.
///
/// Edge `e` carries messages from `src[e]` into `dst[e]`; `dst` doubles as the
/// segment map for attention normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeIndex {
    n: usize,
    dst: Vec<usize>,
    src: Vec<usize>,
    offsets: Vec<usize>,
    /// Edge ids ordered by source, with `src_offsets` delimiting each source.
    by_src: Vec<usize>,
    src_offsets: Vec<usize>,
}

impl EdgeIndex {
    /// Takes the sparsity pattern of a square matrix: entry `(i, j)` becomes the edge `j -> i`.
    pub fn from_pattern(a: &CsrMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim("EdgeIndex::from_pattern", format!("{:?}", a.shape())));
        }
        let n = a.rows();
        let mut dst = Vec::with_capacity(a.nnz());
        let mut src = Vec::with_capacity(a.nnz());
        for i in 0..n {
            for &j in a.row(i).0 {
                dst.push(i);
                src.push(j);
            }
        }
        let offsets = a.indptr().to_vec();
        let t = a.transpose();
        // transpose visits edges grouped by source; recover their ids
        let mut by_src = Vec::with_capacity(a.nnz());
        for j in 0..n {
            for &i in t.row(j).0 {
                let (cols, _) = a.row(i);
                let k = cols.binary_search(&j).expect("pattern entry present");
                by_src.push(a.indptr()[i] + k);
            }
        }
        Ok(Self {
            n,
            dst,
            src,
            offsets,
            by_src,
            src_offsets: t.indptr().to_vec(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.dst.len()
    }

    pub fn dst(&self) -> &[usize] {
        &self.dst
    }

    pub fn src(&self) -> &[usize] {
        &self.src
    }

    /// Edge ids `offsets[i]..offsets[i+1]` all have destination `i`.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub(crate) fn check(&self, weights: &[f64], x: &DenseMatrix) -> Result<()> {
        if weights.len() != self.n_edges() || x.rows() != self.n {
            return Err(Error::dim(
                "edge_aggregate",
                format!(
                    "{} weights / {} rows for {} edges over {} nodes",
                    weights.len(),
                    x.rows(),
                    self.n_edges(),
                    self.n
                ),
            ));
        }
        Ok(())
    }

    pub(crate) fn aggregate(&self, weights: &[f64], x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(weights, x)?;
        let mut out = DenseMatrix::zeros(self.n, x.cols());
        par::for_each_row(out.data_mut(), x.cols(), |i, row| {
            let span = self.offsets[i]..self.offsets[i + 1];
            for (&w, &s) in weights[span.clone()].iter().zip(&self.src[span]) {
                for (o, &v) in row.iter_mut().zip(x.row(s)) {
                    *o += w * v;
                }
            }
        });
        Ok(out)
    }

    pub(crate) fn aggregate_transposed(&self, weights: &[f64], g: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(weights, g)?;
        let mut out = DenseMatrix::zeros(self.n, g.cols());
        par::for_each_row(out.data_mut(), g.cols(), |j, row| {
            for &e in &self.by_src[self.src_offsets[j]..self.src_offsets[j + 1]] {
                let w = weights[e];
                for (o, &v) in row.iter_mut().zip(g.row(self.dst[e])) {
                    *o += w * v;
                }
            }
        });
        Ok(out)
    }

    /// Per-edge `<g[dst], x[src]>`, the gradient of aggregation w.r.t. the weights.
    pub(crate) fn edge_dots(&self, g: &DenseMatrix, x: &DenseMatrix) -> Vec<f64> {
        par::map_range(self.n_edges(), |e| {
            g.row(self.dst[e])
                .iter()
                .zip(x.row(self.src[e]))
                .map(|(a, b)| a * b)
                .sum()
        })
    }

    /// `n x n` matrix with `w[e]` at `(dst[e], src[e])`.
    pub fn dense_weights(&self, weights: &[f64]) -> Result<DenseMatrix> {
        if self.n.saturating_mul(self.n) > super::backend::DENSE_MATERIALIZE_LIMIT {
            return Err(Error::Config(format!(
                "dense backend cannot materialize {} x {} attention",
                self.n, self.n
            )));
        }
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for (e, &w) in weights.iter().enumerate() {
            m.set(self.dst[e], self.src[e], w);
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_matches_dense_product() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (0, 2, 1.0), (1, 0, 1.0), (1, 1, 1.0), (2, 1, 1.0)],
        )
        .unwrap();
        let idx = EdgeIndex::from_pattern(&a).unwrap();
        assert_eq!(idx.dst(), &[0, 0, 1, 1, 2]);
        assert_eq!(idx.src(), &[0, 2, 0, 1, 1]);
        let w = [0.1, 0.2, 0.3, 0.4, 0.5];
        let x = DenseMatrix::from_rows(&[[1.0, -1.0], [2.0, 0.5], [3.0, 4.0]]).unwrap();
        let dense = idx.dense_weights(&w).unwrap();
        let expect = crate::tensor::matmul(&dense, &x).unwrap();
        assert!(idx.aggregate(&w, &x).unwrap().max_abs_diff(&expect) < 1e-15);
        let expect_t = crate::tensor::matmul(&dense.transpose(), &x).unwrap();
        assert!(idx.aggregate_transposed(&w, &x).unwrap().max_abs_diff(&expect_t) < 1e-15);
    }
}
