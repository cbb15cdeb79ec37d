//! A self-contained graph neural network engine.
//!
//! Datasets are plain CSR adjacency plus dense feature arrays, read from and
//! written to NPZ archives. Models from the [`gallery`] (GCN, SGC, GAT) follow
//! a `process -> build -> train -> test` lifecycle and run on one of two
//! interchangeable kernel backends selected at runtime (see [`tensor::Context`]).
//!
//! ```no_run
//! use gallery_core::prelude::*;
//!
//! let graph = synthetic_graph(200, 16, 4, 0.05, 7).unwrap();
//! let mut model = gallery_lookup("gcn").unwrap().create(BackendId::Sparse);
//! model.process(&graph).unwrap().build().unwrap();
//! let history = model.train(&graph, &TrainConfig::gcn()).unwrap();
//! let report = model.test(&graph, graph.split().test()).unwrap();
//! println!("best epoch {} test acc {:.3}", history.best_epoch, report.accuracy);
//! ```

pub mod autodiff;
pub mod error;
pub mod gallery;
pub mod graph;
mod par;
pub mod pipeline;
pub mod rng;
pub mod tensor;
pub mod transforms;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::gallery::{gallery_lookup, Model, ModelConfig, ModelKind};
    pub use crate::graph::{load_graph, parse_npz, save_graph, synthetic_graph, Graph, Split};
    pub use crate::pipeline::{EvalReport, History, Monitor, TrainConfig};
    pub use crate::tensor::{BackendId, Context, CsrMatrix, DenseMatrix};
}
