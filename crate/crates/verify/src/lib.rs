//! Reference numbers and tolerances for the acceptance suite in
//! `tests/acceptance.rs`. Run it with `cargo test -p gallery-verify`.

use std::path::{Path, PathBuf};

use gallery_core::gallery::ModelKind;

/// Reference mean test accuracy (percent) per (model, dataset), 10 seeds,
/// fixed splits.
pub const REFERENCE: [(ModelKind, &str, f64); 7] = [
    (ModelKind::Gcn, "cora", 81.25),
    (ModelKind::Gcn, "citeseer", 70.93),
    (ModelKind::Gcn, "pubmed", 79.06),
    (ModelKind::Sgc, "cora", 80.53),
    (ModelKind::Sgc, "citeseer", 71.93),
    (ModelKind::Gat, "cora", 82.74),
    (ModelKind::Gat, "citeseer", 71.63),
];

/// Allowed distance from [`REFERENCE`], in accuracy points.
pub const REFERENCE_TOL: f64 = 1.5;
pub const REFERENCE_SEEDS: usize = 10;
/// Allowed |mean(dense) - mean(sparse)| for GCN on Cora, in points.
pub const BACKEND_GAP: f64 = 0.8;
pub const GRAD_TOL: f64 = 1e-4;
pub const GRAD_STEP: f64 = 1e-5;
pub const ORACLE_TOL: f64 = 1e-10;
pub const EQUIVARIANCE_TOL: f64 = 1e-10;
/// Wall-clock budget for the gradient and oracle suites.
pub const SUITE_SECONDS: f64 = 30.0;

/// `GALLERY_DATA_ROOT`, else `<workspace>/data`.
pub fn data_root() -> PathBuf {
    std::env::var_os("GALLERY_DATA_ROOT")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace_root().join("data"))
}

pub fn workspace_root() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR")).ancestors().nth(2).expect("crate sits two levels below the workspace")
}
