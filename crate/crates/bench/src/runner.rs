//! Runs a [`BenchSpec`] grid: every (model, dataset) cell for every seed.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use gallery_core::gallery::{Model, ModelKind};
use gallery_core::graph::Graph;
use gallery_core::transforms::NormCache;
use gallery_core::Result;

use crate::config::BenchSpec;
use crate::datasets::{data_root, resolve_dataset};
use crate::report::{BenchReport, Cell, Metadata, RunResult, SCHEMA_VERSION};

/// One train + test cycle. Returns test accuracy in percent and the number
/// of epochs run.
pub fn run_once(
    spec: &BenchSpec,
    kind: ModelKind,
    dataset: &str,
    graph: &Graph,
    seed: u64,
    cache: &Arc<NormCache>,
) -> Result<(f64, usize)> {
    let mut model = Model::new(spec.model_config(kind, dataset, seed)?, spec.backend)?.with_cache(cache.clone());
    model.process(graph)?.build()?;
    let history = model.train(graph, &spec.train_config(kind, dataset, seed)?)?;
    let report = model.test(graph, graph.split().test())?;
    Ok((report.accuracy * 100.0, history.stopped_epoch))
}

struct Task {
    cell: usize,
    seed: u64,
}

fn execute(spec: &BenchSpec, cells: &[(ModelKind, usize)], datasets: &[(String, Result<Graph>)], task: &Task, cache: &Arc<NormCache>) -> (RunResult, f64) {
    let (kind, d) = cells[task.cell];
    let (name, graph) = &datasets[d];
    let start = Instant::now();
    let outcome = match graph {
        Err(e) => Err(format!("error[{}]: {e}", e.class())),
        Ok(g) => match catch_unwind(AssertUnwindSafe(|| run_once(spec, kind, name, g, task.seed, cache))) {
            Ok(Ok(r)) => Ok(r),
            Ok(Err(e)) => Err(format!("error[{}]: {e}", e.class())),
            Err(_) => Err("error[panic]: run panicked".to_string()),
        },
    };
    let secs = start.elapsed().as_secs_f64();
    let result = match outcome {
        Ok((acc, epochs)) => RunResult {
            seed: task.seed,
            accuracy: Some(acc),
            epochs: Some(epochs),
            error: None,
        },
        Err(msg) => RunResult {
            seed: task.seed,
            accuracy: None,
            epochs: None,
            error: Some(msg),
        },
    };
    (result, secs)
}

#[cfg(feature = "parallel")]
fn run_tasks<F>(jobs: usize, tasks: &[Task], f: F) -> Result<Vec<(RunResult, f64)>>
where
    F: Fn(&Task) -> (RunResult, f64) + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| gallery_core::Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(|| tasks.par_iter().map(&f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn run_tasks<F>(_jobs: usize, tasks: &[Task], f: F) -> Result<Vec<(RunResult, f64)>>
where
    F: Fn(&Task) -> (RunResult, f64) + Sync,
{
    Ok(tasks.iter().map(f).collect())
}

/// The resolved spec as flat key/value pairs, echoed into report metadata.
fn echo(spec: &BenchSpec) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let names: Vec<&str> = spec.models.iter().map(|k| k.as_str()).collect();
    m.insert("models".into(), names.join(","));
    m.insert("datasets".into(), spec.datasets.join(","));
    m.insert("seeds".into(), spec.n_seeds.to_string());
    m.insert("seed".into(), spec.base_seed.to_string());
    m.insert("backend".into(), spec.backend.as_str().into());
    for o in &spec.overrides {
        let model = o.model.map_or("*", |k| k.as_str());
        let key = format!("{model}.{}.{}", o.dataset.as_deref().unwrap_or("*"), o.field);
        m.insert(key, o.value.clone());
    }
    m
}

/// Runs the whole grid. Invalid specs fail before any training; failing runs
/// are recorded in their cell and never stop the others.
pub fn run_benchmark(spec: &BenchSpec) -> Result<BenchReport> {
    spec.validate()?;
    let started = Instant::now();
    let root = data_root(spec.data_root.as_deref());
    let datasets: Vec<(String, Result<Graph>)> = spec
        .datasets
        .iter()
        .map(|d| (d.clone(), resolve_dataset(d, &root, spec.urls.get(d).map(String::as_str))))
        .collect();

    // Table layout: datasets outer, models inner.
    let cells: Vec<(ModelKind, usize)> = (0..datasets.len())
        .flat_map(|d| spec.models.iter().map(move |&k| (k, d)))
        .collect();
    let tasks: Vec<Task> = (0..cells.len())
        .flat_map(|cell| spec.seeds().map(move |seed| Task { cell, seed }))
        .collect();
    let cache = Arc::new(NormCache::new());
    let results = run_tasks(spec.jobs, &tasks, |t| execute(spec, &cells, &datasets, t, &cache))?;

    let mut grouped: Vec<(Vec<RunResult>, f64)> = vec![(Vec::new(), 0.0); cells.len()];
    for (task, (run, secs)) in tasks.iter().zip(results) {
        grouped[task.cell].0.push(run);
        grouped[task.cell].1 += secs;
    }
    let report_cells = cells
        .iter()
        .zip(grouped)
        .map(|(&(kind, d), (runs, secs))| Cell::from_runs(kind.as_str(), datasets[d].0.clone(), runs, secs))
        .collect();

    let mut versions = BTreeMap::new();
    versions.insert("gallery-core".to_string(), gallery_core::VERSION.to_string());
    versions.insert("gallery-bench".to_string(), env!("CARGO_PKG_VERSION").to_string());
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        metadata: Metadata {
            backend: spec.backend,
            backend_note: "rows are this engine's kernel backends (dense, sparse), not external deep-learning \
                           frameworks"
                .into(),
            versions,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            wall_time: started.elapsed().as_secs_f64(),
            n_seeds: spec.n_seeds,
            base_seed: spec.base_seed,
            config: echo(spec),
        },
        cells: report_cells,
    })
}
