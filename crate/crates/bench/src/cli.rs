//! The `gallery` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or
//! integrity error, 3 run failure. Every error goes to stderr as a single
//! line `error[<class>]: <message>`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gallery_core::gallery::{gallery_lookup, Model};
use gallery_core::pipeline::{self, Adam, Checkpoint};
use gallery_core::{Error, Result};
use serde::Serialize;

use crate::config::{parse_backend, BenchSpec, ConfigFile};
use crate::convert::{convert, inspect, ConvertInputs};
use crate::datasets::{data_root, fetch_dataset, resolve_dataset, MANIFEST};
use crate::report::{render_report, Format};
use crate::runner::run_benchmark;

#[derive(Debug, Parser)]
#[command(name = "gallery", version, about = "Benchmark GCN, SGC and GAT on citation graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Benchmark a grid of models and datasets over several seeds.
    Run(RunArgs),
    /// Train one model on one dataset and print its test report.
    Train(TrainArgs),
    /// Download registry datasets into the data root.
    Fetch(FetchArgs),
    /// Print statistics of a dataset.
    Inspect(InspectArgs),
    /// Build an NPZ dataset from an edge list and sidecar files.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Flat key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset cache directory (default: $GALLERY_DATA_ROOT, then ./data).
    #[arg(long)]
    data_root: Option<PathBuf>,
    /// Kernel backend: dense or sparse.
    #[arg(long)]
    backend: Option<String>,
    /// Extra config entries, e.g. `gcn.cora.lr=0.02`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Model names, comma-separated or repeated.
    #[arg(long, value_delimiter = ',')]
    model: Vec<String>,
    /// Dataset names, paths or generated specs; separate several with ';'
    /// (generated specs use commas) or repeat the flag.
    #[arg(long, value_delimiter = ';')]
    dataset: Vec<String>,
    /// Number of seeds per cell.
    #[arg(long)]
    seeds: Option<usize>,
    /// First seed; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output format: markdown, json or csv.
    #[arg(long)]
    format: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    dataset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Download location used when a registry dataset is not cached.
    #[arg(long)]
    url_override: Option<String>,
    /// Save a checkpoint after training.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Continue training from a checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// `json` for machine-readable output; anything else prints text.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FetchArgs {
    /// Registry names, comma-separated; all when omitted.
    #[arg(long, value_delimiter = ',')]
    dataset: Vec<String>,
    #[arg(long)]
    data_root: Option<PathBuf>,
    #[arg(long)]
    url_override: Option<String>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    /// NPZ file to inspect.
    file: Option<String>,
    /// Alternatively any `--dataset` argument accepted by `run`.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    data_root: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    splits: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    class_exit_code(e.class())
}

/// Exit code for an error class tag as printed in `error[<class>]`.
pub fn class_exit_code(class: &str) -> i32 {
    match class {
        "usage" | "config" | "not-found" => 1,
        "divergence" | "lifecycle" | "contract" | "unsupported-op" | "run" | "panic" => 3,
        _ => 2,
    }
}

/// Class tag of a recorded run error such as `error[fetch]: ...`.
fn recorded_class(msg: &str) -> &str {
    msg.strip_prefix("error[")
        .and_then(|r| r.split_once(']'))
        .map_or("run", |(c, _)| c)
}

fn report_error(class: &str, msg: &str) {
    let line = msg.replace('\n', " ");
    eprintln!("error[{class}]: {line}");
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            report_error("usage", first.trim_start_matches("error: "));
            return 1;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Train(a) => cmd_train(a),
        Command::Fetch(a) => cmd_fetch(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Convert(a) => cmd_convert(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            report_error(e.class(), &e.to_string());
            exit_code(&e)
        }
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// Defaults, then the config file, then flags. Returns the [`BenchSpec`] and the
/// config file (for CLI-only keys such as `format`).
fn layered_spec(common: &Common) -> Result<(BenchSpec, ConfigFile)> {
    let mut spec = BenchSpec::default();
    let file = match &common.config {
        Some(p) => ConfigFile::parse(
            &fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
        )?,
        None => ConfigFile::default(),
    };
    file.apply_to(&mut spec)?;
    if let Some(b) = &common.backend {
        spec.backend = parse_backend(b)?;
    }
    if let Some(d) = &common.data_root {
        spec.data_root = Some(d.clone());
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        spec.apply(k, v)?;
    }
    Ok((spec, file))
}

fn cmd_run(a: RunArgs) -> Result<i32> {
    let (mut spec, file) = layered_spec(&a.common)?;
    if !a.model.is_empty() {
        spec.models = a.model.iter().map(|m| gallery_lookup(m.trim())).collect::<Result<_>>()?;
    }
    if !a.dataset.is_empty() {
        spec.datasets = a
            .dataset
            .iter()
            .map(|d| d.trim().to_string())
            .filter(|d| !d.is_empty())
            .collect();
    }
    if let Some(n) = a.seeds {
        spec.n_seeds = n;
    }
    if let Some(s) = a.seed {
        spec.base_seed = s;
    }
    if let Some(j) = a.jobs {
        spec.jobs = j;
    }
    let format: Format = a.format.as_deref().or(file.get("format")).unwrap_or("markdown").parse()?;
    let out = a.out.or_else(|| file.get("out").map(PathBuf::from));

    let report = run_benchmark(&spec)?;
    emit(out.as_deref(), &render_report(&report, format)?)?;
    for c in &report.cells {
        for r in c.runs.iter().filter(|r| r.error.is_some()) {
            eprintln!(
                "warning: {}/{} seed {}: {}",
                c.model,
                c.dataset,
                r.seed,
                r.error.as_deref().unwrap_or_default()
            );
        }
    }
    if report.all_failed() {
        // Data problems everywhere (nothing could be loaded) exit as data
        // errors; anything else is a run failure.
        let codes: Vec<i32> = report
            .cells
            .iter()
            .flat_map(|c| &c.runs)
            .filter_map(|r| r.error.as_deref())
            .map(|m| class_exit_code(recorded_class(m)))
            .collect();
        let code = if codes.iter().all(|&c| c == 2) { 2 } else { 3 };
        let class = if code == 2 { "data" } else { "run" };
        report_error(class, &format!("all {} cells failed", report.cells.len()));
        return Ok(code);
    }
    Ok(0)
}

#[derive(Serialize)]
struct TrainOutput {
    model: String,
    dataset: String,
    backend: String,
    seed: u64,
    start_epoch: usize,
    stopped_epoch: usize,
    best_epoch: usize,
    test_accuracy: f64,
    test_loss: f64,
    n_evaluated: usize,
}

fn cmd_train(a: TrainArgs) -> Result<i32> {
    let (spec, file) = layered_spec(&a.common)?;
    let root = data_root(spec.data_root.as_deref());
    let url = a.url_override.as_deref().or_else(|| spec.urls.get(&a.dataset).map(String::as_str));
    let graph = resolve_dataset(&a.dataset, &root, url)?;

    let resumed = a.resume.as_deref().map(Checkpoint::load).transpose()?;
    let kind = match (&a.model, &resumed) {
        (Some(m), Some(ck)) => {
            let k = gallery_lookup(m)?;
            if k != ck.model.kind {
                return Err(Error::Config(format!("--model {k} does not match the checkpoint's {}", ck.model.kind)));
            }
            k
        }
        (Some(m), None) => gallery_lookup(m)?,
        (None, Some(ck)) => ck.model.kind,
        (None, None) => return Err(Error::Config("--model is required unless --resume is given".into())),
    };
    let cfg = spec.train_config(kind, &a.dataset, a.seed)?;
    cfg.validate()?;

    let (mut model, mut opt, start) = match resumed {
        Some(ck) => {
            let mut m = Model::new(ck.model.clone(), ck.backend)?;
            m.process(&graph)?.build_with(ck.in_dim, ck.n_classes)?;
            ck.apply(&mut m)?;
            let opt = ck.optimizer.clone().unwrap_or_else(|| Adam::new(m.params()));
            (m, opt, ck.epoch)
        }
        None => {
            let mut m = Model::new(spec.model_config(kind, &a.dataset, a.seed)?, spec.backend)?;
            m.process(&graph)?.build()?;
            let opt = Adam::new(m.params());
            (m, opt, 0)
        }
    };
    let history = pipeline::train_from(&mut model, &graph, &cfg, &mut opt, start)?;
    let eval = model.test(&graph, graph.split().test())?;
    if let Some(p) = &a.checkpoint {
        Checkpoint::capture(&model, Some(&opt), history.stopped_epoch)?.save(p)?;
    }

    let out = TrainOutput {
        model: kind.as_str().into(),
        dataset: a.dataset.clone(),
        backend: model.backend().as_str().into(),
        seed: a.seed,
        start_epoch: start,
        stopped_epoch: history.stopped_epoch,
        best_epoch: history.best_epoch,
        test_accuracy: eval.accuracy * 100.0,
        test_loss: eval.loss,
        n_evaluated: eval.n_evaluated,
    };
    let json = matches!(a.format.as_deref().or(file.get("format")), Some("json"));
    let bytes = if json {
        let mut v = serde_json::to_vec_pretty(&out).expect("serializes");
        v.push(b'\n');
        v
    } else {
        format!(
            "model: {}\ndataset: {}\nbackend: {}\nseed: {}\nepochs: {}..{} (best {})\n\
             test_accuracy: {:.2}\ntest_loss: {:.4}\nevaluated: {}\n",
            out.model,
            out.dataset,
            out.backend,
            out.seed,
            out.start_epoch + 1,
            out.stopped_epoch,
            out.best_epoch,
            out.test_accuracy,
            out.test_loss,
            out.n_evaluated
        )
        .into_bytes()
    };
    emit(a.out.as_deref(), &bytes)?;
    Ok(0)
}

fn cmd_fetch(a: FetchArgs) -> Result<i32> {
    let root = data_root(a.data_root.as_deref());
    let names: Vec<String> = if a.dataset.is_empty() {
        MANIFEST.iter().map(|e| e.name.to_string()).collect()
    } else {
        a.dataset
    };
    for name in names {
        let path = fetch_dataset(name.trim(), &root, a.url_override.as_deref())?;
        println!("{}", path.display());
    }
    Ok(0)
}

fn cmd_inspect(a: InspectArgs) -> Result<i32> {
    let target = a
        .file
        .or(a.dataset)
        .ok_or_else(|| Error::Config("inspect needs a FILE or --dataset".into()))?;
    let g = resolve_dataset(&target, &data_root(a.data_root.as_deref()), None)?;
    let stats = inspect(&g);
    if a.format.as_deref() == Some("json") {
        println!("{}", serde_json::to_string_pretty(&stats).expect("serializes"));
    } else {
        print!("{}", stats.to_text());
    }
    Ok(0)
}

fn cmd_convert(a: ConvertArgs) -> Result<i32> {
    let g = convert(&ConvertInputs {
        edges: &a.edges,
        labels: &a.labels,
        features: a.features.as_deref(),
        splits: a.splits.as_deref(),
        name: a.name.as_deref(),
    })?;
    gallery_core::graph::write_graph_file(&g, &a.out)?;
    eprintln!("wrote {} ({} nodes, {} entries)", a.out.display(), g.n_nodes(), g.adjacency().nnz());
    Ok(0)
}
