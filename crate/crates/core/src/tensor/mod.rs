//! Dense and CSR matrices, the numerical kernels over them, and the
//! switchable execution backend.

mod backend;
mod csr;
mod dense;
mod edges;
pub mod ops;

pub use backend::{BackendId, Context};
pub use csr::CsrMatrix;
pub use dense::DenseMatrix;
pub use edges::EdgeIndex;
pub use ops::{activation, dropout, matmul, row_softmax, segment_softmax, spmm, Activation};
