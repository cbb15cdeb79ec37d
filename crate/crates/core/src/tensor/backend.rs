use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ops, CsrMatrix, DenseMatrix, EdgeIndex};
use crate::error::{Error, Result};

/// Largest matrix (in entries) the dense backend will materialize.
pub const DENSE_MATERIALIZE_LIMIT: usize = 1 << 28;

/// Which kernel family executes graph propagation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendId {
    /// Sparse operands are densified and multiplied with the dense kernel.
    Dense,
    /// CSR kernels operate on the sparse structure directly.
    #[default]
    Sparse,
}

impl BackendId {
    pub const ALL: [BackendId; 2] = [BackendId::Dense, BackendId::Sparse];

    pub fn as_str(self) -> &'static str {
        match self {
            BackendId::Dense => "dense",
            BackendId::Sparse => "sparse",
        }
    }
}

impl fmt::Display for BackendId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackendId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dense" => Ok(BackendId::Dense),
            "sparse" => Ok(BackendId::Sparse),
            other => Err(Error::Config(format!(
                "unknown backend '{other}' (available: dense, sparse)"
            ))),
        }
    }
}

/// Execution context: owns the active backend indicator for one run.
///
/// There is no process-wide backend; every run carries its own `Context`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Context {
    backend: BackendId,
}

impl Context {
    pub fn new(backend: BackendId) -> Self {
        Self { backend }
    }

    pub fn backend(&self) -> BackendId {
        self.backend
    }

    /// Switches the backend for all later dispatches and returns the previous one.
    pub fn set_backend(&mut self, id: BackendId) -> BackendId {
        std::mem::replace(&mut self.backend, id)
    }

    /// `s * x` on the active backend.
    pub fn spmm(&self, s: &CsrMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
        match self.backend {
            BackendId::Sparse => ops::spmm(s, x),
            BackendId::Dense => {
                if s.cols() != x.rows() {
                    return Err(Error::dim(
                        "spmm",
                        format!("{:?} x {:?}", s.shape(), x.shape()),
                    ));
                }
                ops::matmul(&densify(s)?, x)
            }
        }
    }

    /// `sᵀ * g` on the active backend.
    pub fn spmm_transposed(&self, s: &CsrMatrix, g: &DenseMatrix) -> Result<DenseMatrix> {
        match self.backend {
            BackendId::Sparse => ops::spmm(&s.transpose(), g),
            BackendId::Dense => ops::matmul_tn(&densify(s)?, g),
        }
    }

    /// `out[dst] += w[e] * x[src]` over every edge `e`.
    pub fn edge_aggregate(
        &self,
        edges: &EdgeIndex,
        weights: &[f64],
        x: &DenseMatrix,
    ) -> Result<DenseMatrix> {
        match self.backend {
            BackendId::Sparse => edges.aggregate(weights, x),
            BackendId::Dense => {
                edges.check(weights, x)?;
                ops::matmul(&edges.dense_weights(weights)?, x)
            }
        }
    }

    /// Gradient of [`Context::edge_aggregate`] with respect to `x`.
    pub fn edge_aggregate_transposed(
        &self,
        edges: &EdgeIndex,
        weights: &[f64],
        g: &DenseMatrix,
    ) -> Result<DenseMatrix> {
        match self.backend {
            BackendId::Sparse => edges.aggregate_transposed(weights, g),
            BackendId::Dense => ops::matmul_tn(&edges.dense_weights(weights)?, g),
        }
    }
}

fn densify(s: &CsrMatrix) -> Result<DenseMatrix> {
    if s.rows().saturating_mul(s.cols()) > DENSE_MATERIALIZE_LIMIT {
        return Err(Error::Config(format!(
            "dense backend cannot materialize a {}x{} operand",
            s.rows(),
            s.cols()
        )));
    }
    Ok(s.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_backend_returns_previous() {
        let mut ctx = Context::new(BackendId::Sparse);
        assert_eq!(ctx.set_backend(BackendId::Dense), BackendId::Sparse);
        assert_eq!(ctx.set_backend(BackendId::Dense), BackendId::Dense);
        assert_eq!(ctx.backend(), BackendId::Dense);
    }

    #[test]
    fn parse_backend_names() {
        assert_eq!("Dense".parse::<BackendId>().unwrap(), BackendId::Dense);
        assert_eq!(" sparse ".parse::<BackendId>().unwrap(), BackendId::Sparse);
        assert!(matches!("pytorch".parse::<BackendId>(), Err(Error::Config(_))));
    }

    #[test]
    fn backends_agree_on_spmm() {
        let s = CsrMatrix::from_triplets(3, 3, &[(0, 1, 0.5), (1, 0, 0.5), (2, 2, 1.0)]).unwrap();
        let x = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let dense = Context::new(BackendId::Dense);
        let sparse = Context::new(BackendId::Sparse);
        assert_eq!(dense.spmm(&s, &x).unwrap(), sparse.spmm(&s, &x).unwrap());
        assert_eq!(
            dense.spmm_transposed(&s, &x).unwrap(),
            sparse.spmm_transposed(&s, &x).unwrap()
        );
    }
}
