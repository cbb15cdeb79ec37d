//! Benchmark harness for the gallery engine: dataset registry and download
//! cache, grid runner over models, datasets and seeds, report rendering, and
//! the `gallery` command line.

pub mod cli;
pub mod config;
pub mod convert;
pub mod datasets;
pub mod report;
pub mod runner;

pub use config::BenchSpec;
pub use datasets::{fetch_dataset, resolve_dataset};
pub use report::{render_report, BenchReport, Format};
pub use runner::run_benchmark;
