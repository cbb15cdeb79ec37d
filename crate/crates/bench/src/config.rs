//! Benchmark grid ([`BenchSpec`]) and the flat `key = value` config format.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! line     := blank | comment | entry
//! comment  := '#' anything
//! entry    := key '=' value [comment]
//! key      := models | datasets | seeds | seed | backend | jobs | data_root
//!           | format | out | url.<dataset> | <model>.<dataset>.<field>
//! ```
//!
//! `models` and `datasets` take comma-separated lists. In override keys
//! either `<model>` or `<dataset>` may be `*`. Override fields:
//! `lr`, `weight_decay`, `max_epochs`, `patience`, `monitor` (train) and
//! `hidden`, `heads`, `dropout`, `attn_dropout`, `k`, `negative_slope`,
//! `activation` (model). Later lines win. Precedence across layers is
//! built-in defaults < config file < command-line flags.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use gallery_core::gallery::{gallery_lookup, ModelConfig, ModelKind};
use gallery_core::pipeline::{Monitor, TrainConfig};
use gallery_core::tensor::{Activation, BackendId};
use gallery_core::{Error, Result};

/// One `<model>.<dataset>.<field> = value` patch.
#[derive(Clone, Debug, PartialEq)]
pub struct Override {
    pub model: Option<ModelKind>,
    pub dataset: Option<String>,
    pub field: String,
    pub value: String,
}

impl Override {
    fn matches(&self, kind: ModelKind, dataset: &str) -> bool {
        self.model.is_none_or(|m| m == kind) && self.dataset.as_deref().is_none_or(|d| d == dataset)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSpec {
    pub models: Vec<ModelKind>,
    pub datasets: Vec<String>,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub backend: BackendId,
    /// Worker threads for the run grid; 0 means one per core.
    pub jobs: usize,
    pub data_root: Option<PathBuf>,
    /// Download locations for registry datasets, keyed by dataset name.
    pub urls: BTreeMap<String, String>,
    pub overrides: Vec<Override>,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.to_vec(),
            datasets: vec!["cora".into(), "citeseer".into(), "pubmed".into()],
            n_seeds: 10,
            base_seed: 0,
            backend: BackendId::Sparse,
            jobs: 0,
            data_root: None,
            urls: BTreeMap::new(),
            overrides: Vec::new(),
        }
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        if self.models.is_empty() || self.datasets.is_empty() {
            return Err(Error::Config("at least one model and one dataset are required".into()));
        }
        for m in &self.models {
            for d in &self.datasets {
                self.model_config(*m, d, 0)?.validate()?;
                self.train_config(*m, d, 0)?.validate()?;
            }
        }
        Ok(())
    }

    /// Seeds `base_seed .. base_seed + n_seeds`.
    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_seeds as u64).map(move |i| self.base_seed.wrapping_add(i))
    }

    fn patches(&self, kind: ModelKind, dataset: &str) -> impl Iterator<Item = &Override> {
        let dataset = recipe_name(dataset);
        self.overrides.iter().filter(move |o| o.matches(kind, &dataset))
    }

    pub fn model_config(&self, kind: ModelKind, dataset: &str, seed: u64) -> Result<ModelConfig> {
        let mut c = ModelConfig::for_dataset(kind, &recipe_name(dataset)).with_seed(seed);
        for o in self.patches(kind, dataset) {
            let v = o.value.as_str();
            match o.field.as_str() {
                "hidden" => c.hidden_dims = parse_list(v, &o.field)?,
                "heads" => c.heads = parse_list(v, &o.field)?,
                "dropout" => c.dropout = parse(v, &o.field)?,
                "attn_dropout" => c.attn_dropout = parse(v, &o.field)?,
                "k" => c.k_hops = Some(parse(v, &o.field)?),
                "negative_slope" => c.negative_slope = parse(v, &o.field)?,
                "activation" => c.activation = parse_activation(v)?,
                _ => {}
            }
        }
        Ok(c)
    }

    pub fn train_config(&self, kind: ModelKind, dataset: &str, seed: u64) -> Result<TrainConfig> {
        let mut c = TrainConfig::for_dataset(kind, &recipe_name(dataset)).with_seed(seed);
        for o in self.patches(kind, dataset) {
            let v = o.value.as_str();
            match o.field.as_str() {
                "lr" => c.lr = parse(v, &o.field)?,
                "weight_decay" => c.weight_decay = parse(v, &o.field)?,
                "max_epochs" => c.max_epochs = parse(v, &o.field)?,
                "patience" => c.patience = parse(v, &o.field)?,
                "monitor" => c.monitor = Monitor::from_str(v)?,
                _ => {}
            }
        }
        Ok(c)
    }

    /// Applies one `key = value` setting. Shared by the config file and
    /// `--set`, so both accept the same keys.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "models" | "model" => {
                self.models = split_list(value).map(gallery_lookup).collect::<Result<_>>()?;
            }
            "datasets" | "dataset" => self.datasets = split_list(value).map(str::to_string).collect(),
            "seeds" => self.n_seeds = parse(value, "seeds")?,
            "seed" => self.base_seed = parse(value, "seed")?,
            "backend" => self.backend = parse_backend(value)?,
            "jobs" => self.jobs = parse(value, "jobs")?,
            "data_root" => self.data_root = Some(PathBuf::from(value)),
            key => {
                if let Some(ds) = key.strip_prefix("url.") {
                    self.urls.insert(ds.to_string(), value.to_string());
                    return Ok(());
                }
                let parts: Vec<&str> = key.split('.').collect();
                let [model, dataset, field] = parts[..] else {
                    return Err(Error::Config(format!("unknown key '{key}'")));
                };
                if !OVERRIDE_FIELDS.contains(&field) {
                    return Err(Error::Config(format!(
                        "unknown override field '{field}' (expected one of {})",
                        OVERRIDE_FIELDS.join(", ")
                    )));
                }
                self.overrides.push(Override {
                    model: (model != "*").then(|| gallery_lookup(model)).transpose()?,
                    dataset: (dataset != "*").then(|| dataset.to_string()),
                    field: field.to_string(),
                    value: value.to_string(),
                });
            }
        }
        Ok(())
    }
}

const OVERRIDE_FIELDS: &[&str] = &[
    "lr",
    "weight_decay",
    "max_epochs",
    "patience",
    "monitor",
    "hidden",
    "heads",
    "dropout",
    "attn_dropout",
    "k",
    "negative_slope",
    "activation",
];

/// Keys [`BenchSpec`] does not consume but the CLI does (`format`, `out`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub entries: Vec<(usize, String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected 'key = value', got '{line}'", i + 1)));
            };
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            entries.push((i + 1, k.to_string(), v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(_, k, _)| k == key).map(|(_, _, v)| v.as_str())
    }

    /// Applies every entry except the CLI-only keys to `spec`.
    pub fn apply_to(&self, spec: &mut BenchSpec) -> Result<()> {
        for (line, k, v) in &self.entries {
            if matches!(k.as_str(), "format" | "out") {
                continue;
            }
            spec.apply(k, v).map_err(|e| Error::Config(format!("line {line}: {e}")))?;
        }
        Ok(())
    }
}

/// Dataset name used to pick per-dataset recipes: the file stem for paths,
/// the kind for generated specs, the name itself otherwise.
pub fn recipe_name(dataset: &str) -> String {
    if dataset.ends_with(".npz") {
        return std::path::Path::new(dataset)
            .file_stem()
            .map_or_else(|| dataset.to_string(), |s| s.to_string_lossy().into_owned());
    }
    dataset.split(':').next().unwrap_or(dataset).to_ascii_lowercase()
}

pub fn parse_backend(s: &str) -> Result<BackendId> {
    match s.trim().to_ascii_lowercase().as_str() {
        "dense" => Ok(BackendId::Dense),
        "sparse" => Ok(BackendId::Sparse),
        other => Err(Error::NotFound {
            kind: "backend",
            name: other.to_string(),
            available: "dense, sparse".into(),
        }),
    }
}

fn parse_activation(s: &str) -> Result<Activation> {
    Ok(match s.trim().to_ascii_lowercase().as_str() {
        "relu" => Activation::Relu,
        "elu" => Activation::Elu,
        "identity" | "none" => Activation::Identity,
        other => match other.strip_prefix("leaky_relu:") {
            Some(slope) => Activation::LeakyRelu(parse(slope, "activation")?),
            None => {
                return Err(Error::Config(format!(
                    "unknown activation '{s}' (relu, elu, identity, leaky_relu:<slope>)"
                )))
            }
        },
    })
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty())
}

fn parse<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{s}' for {what}")))
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    split_list(s).map(|p| parse(p, what)).collect()
}
